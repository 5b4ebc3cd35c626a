"""Checkpoint container.

A checkpoint is one binary file: magic, a JSON metadata block (config
snapshot, epoch, best dev loss, Adam scalars, section order), then one
MFX1 section per named array (parameters plus Adam first/second
moments), each stored float64 so save -> load -> score reproduces the
in-memory scores to the last bit.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .classifier import HeadParams
from .config import RunConfig
from .embeddings import (
    DTYPE_F64,
    KIND_PARAM,
    EmbeddingMatrix,
    matrix_bytes,
    parse_matrix,
)
from .errors import CheckpointError, TruncationError
from .fusion import FusionParams
from .modspec import N_MOD_BINS
from .tensor_nn import AdamState, AffineLayer, Tensor2

MAGIC = b"MFCP"
VERSION = 1


@dataclass
class CheckpointBundle:
    config: RunConfig
    fusion: FusionParams
    head: HeadParams
    adam: AdamState
    epoch: int
    best_dev_loss: float
    version: int = VERSION

    def named_parameters(self) -> dict[str, Tensor2]:
        out = dict(self.fusion.named_parameters())
        out.update(self.head.named_parameters())
        return out


def _snapshot_layer(layer: AffineLayer) -> AffineLayer:
    return AffineLayer(
        weight=Tensor2(layer.weight.data.copy(), requires_grad=True),
        bias=Tensor2(layer.bias.data.copy(), requires_grad=True),
    )


def snapshot_bundle(bundle: CheckpointBundle) -> CheckpointBundle:
    """Deep copy: later training steps cannot mutate a kept best-epoch bundle."""
    fusion = bundle.fusion
    head = bundle.head
    return CheckpointBundle(
        config=dataclasses.replace(bundle.config),
        fusion=FusionParams(
            proj_ssl=_snapshot_layer(fusion.proj_ssl),
            q_layer=_snapshot_layer(fusion.q_layer),
            k_layer=_snapshot_layer(fusion.k_layer),
            v_layer=_snapshot_layer(fusion.v_layer),
            out_layer=_snapshot_layer(fusion.out_layer),
            heads=fusion.heads,
            model_dim=fusion.model_dim,
        ),
        head=HeadParams(
            hidden=_snapshot_layer(head.hidden),
            out=_snapshot_layer(head.out),
        ),
        adam=AdamState(
            learning_rate=bundle.adam.learning_rate,
            beta1=bundle.adam.beta1,
            beta2=bundle.adam.beta2,
            eps=bundle.adam.eps,
            step=bundle.adam.step,
            m={k: v.copy() for k, v in bundle.adam.m.items()},
            v={k: v.copy() for k, v in bundle.adam.v.items()},
        ),
        epoch=bundle.epoch,
        best_dev_loss=bundle.best_dev_loss,
        version=bundle.version,
    )


def _config_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if d["class_weights"] is not None:
        d["class_weights"] = list(d["class_weights"])
    return d


def save_checkpoint(path, bundle: CheckpointBundle):
    params = bundle.named_parameters()
    sections: list[tuple[str, np.ndarray]] = list(
        (name, p.data) for name, p in params.items()
    )
    for name in params:
        sections.append((f"adam.m.{name}", bundle.adam.m.get(
            name, np.zeros_like(params[name].data))))
        sections.append((f"adam.v.{name}", bundle.adam.v.get(
            name, np.zeros_like(params[name].data))))

    meta = {
        "version": bundle.version,
        "config": _config_dict(bundle.config),
        "epoch": bundle.epoch,
        "best_dev_loss": bundle.best_dev_loss,
        "adam": {
            "step": bundle.adam.step,
            "learning_rate": bundle.adam.learning_rate,
            "beta1": bundle.adam.beta1,
            "beta2": bundle.adam.beta2,
            "eps": bundle.adam.eps,
        },
        "sections": [name for name, _ in sections],
    }
    blob = io.BytesIO()
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob.write(MAGIC)
    blob.write(struct.pack("<HI", VERSION, len(meta_bytes)))
    blob.write(meta_bytes)
    for name, arr in sections:
        body = matrix_bytes(
            EmbeddingMatrix(utt_id=name, values=arr, kind=KIND_PARAM),
            dtype_code=DTYPE_F64,
        )
        blob.write(struct.pack("<HI", len(name.encode()), len(body)))
        blob.write(name.encode())
        blob.write(body)
    with open(path, "wb") as fh:
        fh.write(blob.getvalue())


def load_checkpoint(path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, meta_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos = 10
    if len(data) < pos + meta_len:
        raise TruncationError(f"{path}: truncated metadata")
    meta = json.loads(data[pos:pos + meta_len].decode("utf-8"))
    pos += meta_len

    arrays: dict[str, np.ndarray] = {}
    while pos < len(data):
        if len(data) < pos + 6:
            raise TruncationError(f"{path}: truncated section header")
        name_len, body_len = struct.unpack_from("<HI", data, pos)
        pos += 6
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        if len(data) < pos + body_len:
            raise TruncationError(f"{path}: truncated section {name!r}")
        arrays[name] = parse_matrix(data[pos:pos + body_len], label=name).values
        pos += body_len
    if set(arrays) != set(meta["sections"]):
        raise CheckpointError(f"{path}: section list does not match metadata")

    cfg_raw = dict(meta["config"])
    if cfg_raw.get("class_weights") is not None:
        cfg_raw["class_weights"] = tuple(cfg_raw["class_weights"])
    cfg = RunConfig(**cfg_raw)

    def layer(prefix: str, in_dim: int, out_dim: int) -> AffineLayer:
        w = arrays.get(f"{prefix}.weight")
        b = arrays.get(f"{prefix}.bias")
        if w is None or b is None:
            raise CheckpointError(f"{path}: missing section for {prefix}")
        if w.shape != (in_dim, out_dim):
            raise CheckpointError(
                f"{path}: {prefix}.weight is {w.shape}, config declares "
                f"{(in_dim, out_dim)}"
            )
        return AffineLayer(
            weight=Tensor2(w, requires_grad=True),
            bias=Tensor2(b, requires_grad=True),
        )

    fusion = FusionParams(
        proj_ssl=layer("fusion.proj_ssl", arrays["fusion.proj_ssl.weight"].shape[0],
                       cfg.proj_dim),
        q_layer=layer("fusion.q_layer", N_MOD_BINS, cfg.model_dim),
        k_layer=layer("fusion.k_layer", cfg.proj_dim, cfg.model_dim),
        v_layer=layer("fusion.v_layer", cfg.proj_dim, cfg.model_dim),
        out_layer=layer("fusion.out_layer", cfg.model_dim, cfg.model_dim),
        heads=cfg.heads,
        model_dim=cfg.model_dim,
    )
    head = HeadParams(
        hidden=layer("head.hidden", 2 * cfg.model_dim, cfg.hidden_dim),
        out=layer("head.out", cfg.hidden_dim, 2),
    )
    adam = AdamState(
        learning_rate=meta["adam"]["learning_rate"],
        beta1=meta["adam"]["beta1"],
        beta2=meta["adam"]["beta2"],
        eps=meta["adam"]["eps"],
        step=meta["adam"]["step"],
        m={k[len("adam.m."):]: v for k, v in arrays.items()
           if k.startswith("adam.m.")},
        v={k[len("adam.v."):]: v for k, v in arrays.items()
           if k.startswith("adam.v.")},
    )
    return CheckpointBundle(
        config=cfg, fusion=fusion, head=head, adam=adam,
        epoch=int(meta["epoch"]), best_dev_loss=float(meta["best_dev_loss"]),
        version=version,
    )
