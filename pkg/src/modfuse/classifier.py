"""Detection head: max+mean pooling over the fused sequence, one hidden
layer, two output logits (index 0 = fake, index 1 = bonafide).

Stands in for the graph-attention back-end of the full-scale system
while keeping its final stage: pooling into a two-node output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError
from .fusion import MODEL_DIM, FusedFeature
from .tensor_nn import AffineLayer, Tensor2, col_max, col_mean, concat_cols, relu

HIDDEN_DIM = 128


@dataclass
class HeadParams:
    hidden: AffineLayer   # 2*model_dim -> hidden_dim
    out: AffineLayer      # hidden_dim -> 2
    activation: str = "relu"

    def __post_init__(self):
        if self.out.out_dim != 2:
            raise ParameterError("head must end in exactly 2 logits")
        if self.hidden.out_dim != self.out.in_dim:
            raise ParameterError("hidden width does not match output layer")
        if self.activation != "relu":
            raise ParameterError(f"unknown activation {self.activation!r}")

    @classmethod
    def init(cls, rng, model_dim: int = MODEL_DIM,
             hidden_dim: int = HIDDEN_DIM) -> "HeadParams":
        if isinstance(rng, (int, np.integer)):
            rng = np.random.Generator(np.random.Philox(key=np.uint64(rng)))
        return cls(
            hidden=AffineLayer.xavier(2 * model_dim, hidden_dim, rng),
            out=AffineLayer.xavier(hidden_dim, 2, rng),
        )

    def named_parameters(self) -> dict[str, Tensor2]:
        return {
            "head.hidden.weight": self.hidden.weight,
            "head.hidden.bias": self.hidden.bias,
            "head.out.weight": self.out.weight,
            "head.out.bias": self.out.bias,
        }


def pool_features(f: FusedFeature) -> Tensor2:
    """Columnwise max concatenated with columnwise mean: T x C -> 1 x 2C."""
    return concat_cols([col_max(f.values), col_mean(f.values)])


def head_logits(f: FusedFeature, params: HeadParams) -> Tensor2:
    return params.out.apply(relu(params.hidden.apply(pool_features(f))))


def score(f: FusedFeature, params: HeadParams) -> float:
    """Detection score: bonafide logit minus fake logit. Higher means
    more bonafide."""
    logits = head_logits(f, params).data
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in scoring head")
    return float(logits[0, 1] - logits[0, 0])
