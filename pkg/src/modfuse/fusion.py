"""Multi-head attention fusion of modulation-spectrogram queries with
SSL-embedding keys and values.

The modulation spectrogram is read as 201 tokens (acoustic-frequency
rows) of 202 features, matching the 201-step SSL sequence. Embeddings
are first projected 1024 -> 128, then separate affine layers produce
K and V; the query layer maps the modulation feature directly. All four
fusion layers output the model dimension P = 256, split across h = 4
heads of 64 columns each. Standard scaled dot-product attention,
softmax(Q K^T / sqrt(d_k)) V, so each query token attends over the SSL
sequence. No positional encoding, no dropout, no layer norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import SSL_DIM, EmbeddingMatrix
from .errors import ParameterError, ShapeError
from .modspec import N_MOD_BINS, ModSpectrogram
from .tensor_nn import (
    AffineLayer,
    Tensor2,
    concat_cols,
    constant,
    matmul,
    scale,
    slice_cols,
    softmax_rows,
    transpose,
)

MODEL_DIM = 256
HEADS = 4
PROJ_DIM = 128


@dataclass
class FusionParams:
    proj_ssl: AffineLayer    # ssl_dim -> proj_dim
    q_layer: AffineLayer     # query features -> model_dim
    k_layer: AffineLayer     # proj_dim -> model_dim
    v_layer: AffineLayer     # proj_dim -> model_dim
    out_layer: AffineLayer   # model_dim -> model_dim
    heads: int = HEADS
    model_dim: int = MODEL_DIM

    def __post_init__(self):
        if self.heads < 1 or self.model_dim % self.heads != 0:
            raise ParameterError(
                f"{self.heads} heads must divide model dim {self.model_dim}"
            )
        wired = (
            self.q_layer.out_dim == self.k_layer.out_dim == self.v_layer.out_dim
            == self.out_layer.in_dim == self.out_layer.out_dim == self.model_dim
            and self.k_layer.in_dim == self.v_layer.in_dim == self.proj_ssl.out_dim
        )
        if not wired:
            raise ShapeError("fusion layer dimensions are inconsistent")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    @classmethod
    def init(cls, rng, query_dim: int = N_MOD_BINS, ssl_dim: int = SSL_DIM,
             proj_dim: int = PROJ_DIM, model_dim: int = MODEL_DIM,
             heads: int = HEADS) -> "FusionParams":
        """Seeded Xavier-uniform init; layers are drawn in a fixed order
        (proj, q, k, v, out) so checkpoints are reproducible."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.Generator(np.random.Philox(key=np.uint64(rng)))
        return cls(
            proj_ssl=AffineLayer.xavier(ssl_dim, proj_dim, rng),
            q_layer=AffineLayer.xavier(query_dim, model_dim, rng),
            k_layer=AffineLayer.xavier(proj_dim, model_dim, rng),
            v_layer=AffineLayer.xavier(proj_dim, model_dim, rng),
            out_layer=AffineLayer.xavier(model_dim, model_dim, rng),
            heads=heads,
            model_dim=model_dim,
        )

    def named_parameters(self) -> dict[str, Tensor2]:
        out = {}
        for layer_name in ("proj_ssl", "q_layer", "k_layer", "v_layer", "out_layer"):
            layer = getattr(self, layer_name)
            out[f"fusion.{layer_name}.weight"] = layer.weight
            out[f"fusion.{layer_name}.bias"] = layer.bias
        return out


@dataclass
class FusedFeature:
    """Fused sequence, canonically 201 x 256."""

    values: Tensor2


def scaled_dot_attention(q: Tensor2, k: Tensor2, v: Tensor2) -> Tensor2:
    """softmax(q k^T / sqrt(d)) v.

    Row i of the output is the value average weighted by how well query
    token i matches every key token.
    """
    if q.data.shape[1] != k.data.shape[1]:
        raise ShapeError(
            f"query dim {q.data.shape[1]} != key dim {k.data.shape[1]}"
        )
    if k.data.shape[0] != v.data.shape[0]:
        raise ShapeError(
            f"{k.data.shape[0]} keys cannot index {v.data.shape[0]} values"
        )
    d = q.data.shape[1]
    logits = scale(matmul(q, transpose(k)), 1.0 / np.sqrt(d))
    return matmul(softmax_rows(logits), v)


def fuse_sequences(query: Tensor2, ssl: Tensor2, params: FusionParams,
                   collect_weights=None) -> Tensor2:
    """General-shape fusion core: (T x Dq, T x Ds) -> T x P.

    collect_weights, if given, receives each head's softmax matrix from
    this same forward pass.
    """
    if query.data.shape[0] != ssl.data.shape[0]:
        raise ShapeError(
            f"query has {query.data.shape[0]} tokens, embeddings "
            f"{ssl.data.shape[0]}"
        )
    projected = params.proj_ssl.apply(ssl)
    q = params.q_layer.apply(query)
    k = params.k_layer.apply(projected)
    v = params.v_layer.apply(projected)

    hd = params.head_dim
    head_outputs = []
    for i in range(params.heads):
        lo, hi = i * hd, (i + 1) * hd
        qi, ki, vi = (slice_cols(t, lo, hi) for t in (q, k, v))
        weights = softmax_rows(scale(matmul(qi, transpose(ki)), 1.0 / np.sqrt(hd)))
        if collect_weights is not None:
            collect_weights.append(weights.data.copy())
        head_outputs.append(matmul(weights, vi))
    merged = head_outputs[0] if len(head_outputs) == 1 else concat_cols(head_outputs)
    return params.out_layer.apply(merged)


def multi_head_fuse(ms: ModSpectrogram, ssl: EmbeddingMatrix,
                    params: FusionParams) -> FusedFeature:
    """Canonical entry point: (201x202 feature, 201x1024 embeddings) -> 201x256."""
    return FusedFeature(
        values=fuse_sequences(constant(ms.values), constant(ssl.values), params)
    )


def attention_weights(ms: ModSpectrogram, ssl: EmbeddingMatrix,
                      params: FusionParams) -> list[np.ndarray]:
    """Per-head softmax weight matrices from the fusion forward pass;
    every row sums to 1."""
    collected: list[np.ndarray] = []
    fuse_sequences(constant(ms.values), constant(ssl.values), params,
                   collect_weights=collected)
    return collected
