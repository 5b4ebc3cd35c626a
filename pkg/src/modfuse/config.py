"""Run configuration.

Defaults are the full-scale recipe (learning rate 1e-6, batch 14,
100 epochs, raw features). The desk preset swaps in settings that make
toy runs converge in minutes: learning rate 1e-3, 8 epochs, log1p
feature compression.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParameterError, SchemaError

CACHE_DIR_ENV = "MODFUSE_CACHE_DIR"


@dataclass
class RunConfig:
    seed: int = 0
    learning_rate: float = 1e-6
    batch_size: int = 14
    epochs: int = 100
    class_weights: tuple[float, float] | None = None   # None -> inverse-frequency
    window: str = "hann"
    heads: int = 4
    model_dim: int = 256
    proj_dim: int = 128
    hidden_dim: int = 128
    feature_log1p: bool = False
    augment_noise_snr_db: float | None = None
    train_manifest: str | None = None
    dev_manifest: str | None = None
    cache_dir: str | None = None
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.seed < 0:
            raise ParameterError(f"seed must be nonnegative, got {self.seed}")
        for name in ("learning_rate", "batch_size", "epochs", "heads",
                     "model_dim", "proj_dim", "hidden_dim"):
            v = getattr(self, name)
            if v < 0 or (name != "epochs" and v <= 0):
                raise ParameterError(f"{name} must be positive, got {v}")
        if self.model_dim % self.heads != 0:
            raise ParameterError(
                f"heads ({self.heads}) must divide model_dim ({self.model_dim})"
            )
        if self.class_weights is not None:
            w = tuple(float(x) for x in self.class_weights)
            if len(w) != 2 or w[0] <= 0 or w[1] <= 0:
                raise ParameterError(f"class_weights must be 2 positive reals, got {w}")
            self.class_weights = w
        if self.window not in ("hann", "hamming", "rect"):
            raise ParameterError(f"unknown window {self.window!r}")

    def effective_cache_dir(self) -> str | None:
        return os.environ.get(CACHE_DIR_ENV) or self.cache_dir


def desk_preset(**overrides) -> RunConfig:
    base = dict(learning_rate=1e-3, epochs=8, feature_log1p=True)
    base.update(overrides)
    return RunConfig(**base)


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a TOML key/value file over an optional base config.

    Unknown keys are rejected rather than ignored so a typo cannot
    silently fall back to a default.
    """
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    unknown = set(raw) - _FIELDS
    if unknown:
        raise SchemaError(f"{path}: unknown config key(s) {sorted(unknown)}")
    if raw.get("class_weights") == "auto":
        raw["class_weights"] = None
    merged = dataclasses.asdict(base) if base is not None else {}
    merged.update(raw)
    return RunConfig(**merged)
