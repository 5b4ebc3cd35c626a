"""Dataset resolution, the training loop, feature caching, and scoring.

Determinism contract: (seed, config, manifests, embedding bytes) fully
determine the result. Shuffling and augmentation noise come from
counter-based Philox streams keyed on the seed, so adding logging or
re-ordering unrelated code cannot perturb the draw sequence. Two runs
with the same inputs produce bit-identical checkpoints.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from filelock import FileLock

from . import protocol
from .audio_io import CLIP_SAMPLES, fix_length, load_wav
from .checkpoint import CheckpointBundle, snapshot_bundle
from .classifier import HeadParams, head_logits, score
from .config import RunConfig
from .embeddings import (
    KIND_MODSPEC,
    SSL_DIM,
    EmbeddingMatrix,
    read_matrix,
    write_matrix,
)
from .errors import (
    CacheInvalidError,
    DataError,
    GeometryError,
    ManifestError,
    NumericError,
)
from .fusion import FusedFeature, FusionParams, fuse_sequences
from .metrics import ScoreRecord
from .modspec import N_BINS, N_MOD_BINS, modspec_feature
from .tensor_nn import (
    AdamState,
    Tensor2,
    adam_step,
    concat_rows,
    constant,
    weighted_cross_entropy,
    zero_grads,
)

_TAG_INIT = 1
_TAG_SHUFFLE = 2
_TAG_NOISE = 3

_LABEL_INDEX = {protocol.LABEL_FAKE: 0, protocol.LABEL_BONAFIDE: 1}


def _stream(seed: int, tag: int, counter=None) -> np.random.Generator:
    bits = np.random.Philox(
        key=np.array([seed, tag], dtype=np.uint64),
        counter=None if counter is None else np.array(counter, dtype=np.uint64),
    )
    return np.random.Generator(bits)


@dataclass
class ResolvedExample:
    utt_id: str
    label_index: int          # 0 = fake, 1 = bonafide
    feature: np.ndarray       # 201 x 202 float64
    embedding_path: str
    group: str | None = None
    waveform: np.ndarray | None = None   # kept only when augmenting


def cache_path(cache_dir: str, utt_id: str) -> str:
    return os.path.join(cache_dir, f"{utt_id}.mfx")


def _read_cached_feature(path: str) -> np.ndarray:
    try:
        m = read_matrix(path)
    except DataError as exc:
        raise CacheInvalidError(f"corrupt feature cache {path}: {exc}") from None
    if m.kind != KIND_MODSPEC or m.values.shape != (N_BINS, N_MOD_BINS):
        raise CacheInvalidError(
            f"feature cache {path} is kind {m.kind!r} shape {m.values.shape}; "
            f"pipeline expects {KIND_MODSPEC} {N_BINS}x{N_MOD_BINS}"
        )
    return m.values


def resolve_examples(entries, cfg: RunConfig, keep_waveform: bool = False):
    """Turn manifest entries into in-memory training examples.

    Features come from the cache when present, otherwise straight from
    the audio. Embeddings stay on disk and are re-read per use, so the
    corpus size never bounds memory.
    """
    cache_dir = cfg.effective_cache_dir()
    examples: list[ResolvedExample] = []
    for e in entries:
        if e.embedding_path is None:
            raise ManifestError(f"{e.utt_id}: manifest entry has no embedding_path")
        if not os.path.exists(e.embedding_path):
            raise ManifestError(
                f"{e.utt_id}: embedding file {e.embedding_path} does not exist"
            )
        feature = None
        waveform = None
        if cache_dir is not None:
            cpath = cache_path(cache_dir, e.utt_id)
            if os.path.exists(cpath):
                feature = _read_cached_feature(cpath)
        if feature is None or keep_waveform:
            if e.audio_path is None:
                raise ManifestError(
                    f"{e.utt_id}: no cached feature and no audio_path"
                )
            samples, _rate = load_wav(e.audio_path)
            clip = fix_length(samples, source_id=e.utt_id)
            waveform = clip.samples
            if feature is None:
                feature = modspec_feature(clip, cfg.window).values
        examples.append(ResolvedExample(
            utt_id=e.utt_id,
            label_index=_LABEL_INDEX[e.label],
            feature=feature,
            embedding_path=e.embedding_path,
            group=e.language or e.attack_id,
            waveform=waveform if keep_waveform else None,
        ))
    return examples


def _load_embedding(ex: ResolvedExample, fusion: FusionParams) -> np.ndarray:
    m = read_matrix(ex.embedding_path)
    want_rows = ex.feature.shape[0]
    want_cols = fusion.proj_ssl.in_dim
    if m.values.shape != (want_rows, want_cols):
        raise GeometryError(
            f"{ex.utt_id}: embedding is {m.values.shape}, pipeline expects "
            f"({want_rows}, {want_cols})"
        )
    return m.values


def _augmented_feature(ex: ResolvedExample, cfg: RunConfig, epoch: int,
                       index: int) -> np.ndarray:
    snr_db = cfg.augment_noise_snr_db
    if snr_db is None or ex.waveform is None:
        return ex.feature
    rng = _stream(cfg.seed, _TAG_NOISE, counter=[0, 0, index, epoch])
    power = float(np.mean(ex.waveform ** 2))
    if power == 0.0:
        return ex.feature
    sigma = math.sqrt(power / (10.0 ** (snr_db / 10.0)))
    noisy = ex.waveform + rng.normal(0.0, sigma, CLIP_SAMPLES)
    clip = fix_length(noisy, source_id=ex.utt_id)
    return modspec_feature(clip, cfg.window).values


def example_logits(feature: np.ndarray, embedding: np.ndarray,
                   fusion: FusionParams, head: HeadParams,
                   log1p: bool) -> Tensor2:
    feat = np.log1p(feature) if log1p else feature
    fused = fuse_sequences(constant(feat), constant(embedding), fusion)
    return head_logits(FusedFeature(values=fused), head)


def _batch_loss(examples, features, fusion, head, weights, log1p) -> Tensor2:
    rows = [
        example_logits(f, _load_embedding(ex, fusion), fusion, head, log1p)
        for ex, f in zip(examples, features)
    ]
    logits = concat_rows(rows)
    labels = [ex.label_index for ex in examples]
    return weighted_cross_entropy(logits, labels, weights)


def _dataset_loss(examples, fusion, head, weights, cfg) -> float:
    total = 0.0
    for start in range(0, len(examples), cfg.batch_size):
        batch = examples[start:start + cfg.batch_size]
        loss = _batch_loss(batch, [ex.feature for ex in batch],
                           fusion, head, weights, cfg.feature_log1p)
        total += loss.item() * len(batch)
    return total / len(examples)


@dataclass
class TrainResult:
    best: CheckpointBundle
    last: CheckpointBundle
    history: list[dict]


def train(cfg: RunConfig, train_entries, dev_entries, progress=None) -> TrainResult:
    """Fit the fusion front-end and head; returns the best-dev-loss and
    final-epoch checkpoints plus the per-epoch loss history."""
    if not train_entries or not dev_entries:
        raise ManifestError("train and dev manifests must both be non-empty")
    weights = cfg.class_weights or protocol.class_weights(train_entries)

    augment = cfg.augment_noise_snr_db is not None
    train_ex = resolve_examples(train_entries, cfg, keep_waveform=augment)
    dev_ex = resolve_examples(dev_entries, cfg)

    init_rng = _stream(cfg.seed, _TAG_INIT)
    fusion = FusionParams.init(init_rng, query_dim=N_MOD_BINS, ssl_dim=SSL_DIM,
                               proj_dim=cfg.proj_dim, model_dim=cfg.model_dim,
                               heads=cfg.heads)
    head = HeadParams.init(init_rng, model_dim=cfg.model_dim,
                           hidden_dim=cfg.hidden_dim)
    params = {**fusion.named_parameters(), **head.named_parameters()}
    adam = AdamState(learning_rate=cfg.learning_rate)
    shuffle_rng = _stream(cfg.seed, _TAG_SHUFFLE)

    def bundle(epoch: int, dev_loss: float) -> CheckpointBundle:
        return CheckpointBundle(config=cfg, fusion=fusion, head=head,
                                adam=adam, epoch=epoch, best_dev_loss=dev_loss)

    dev_loss = _dataset_loss(dev_ex, fusion, head, weights, cfg)
    best = snapshot_bundle(bundle(0, dev_loss))
    history = [{"epoch": 0, "train_loss": math.nan, "dev_loss": dev_loss}]

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_ex))
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch_idx = order[start:start + cfg.batch_size]
            batch = [train_ex[i] for i in batch_idx]
            feats = [_augmented_feature(ex, cfg, epoch, int(i))
                     for ex, i in zip(batch, batch_idx)]
            zero_grads(params)
            try:
                loss = _batch_loss(batch, feats, fusion, head, weights,
                                   cfg.feature_log1p)
                loss.backward()
                adam_step(params, adam)
            except NumericError as exc:
                raise NumericError(
                    f"training aborted at epoch {epoch}, batch starting "
                    f"{start}: {exc}"
                ) from exc
            loss_sum += loss.item() * len(batch)
        train_loss = loss_sum / len(train_ex)
        dev_loss = _dataset_loss(dev_ex, fusion, head, weights, cfg)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "dev_loss": dev_loss})
        if progress is not None:
            progress(epoch, train_loss, dev_loss)
        if dev_loss < best.best_dev_loss:
            best = snapshot_bundle(bundle(epoch, dev_loss))

    last = snapshot_bundle(bundle(cfg.epochs, best.best_dev_loss))
    return TrainResult(best=best, last=last, history=history)


def score_stream(bundle: CheckpointBundle, entries):
    """Score manifest entries one by one.

    Yields (ScoreRecord, None) or (None, (utt_id, message)) per entry;
    per-utterance failures do not stop the run.
    """
    cfg = bundle.config
    for e in entries:
        try:
            (ex,) = resolve_examples([e], cfg)
            emb = _load_embedding(ex, bundle.fusion)
            feat = np.log1p(ex.feature) if cfg.feature_log1p else ex.feature
            fused = fuse_sequences(constant(feat), constant(emb), bundle.fusion)
            s = score(FusedFeature(values=fused), bundle.head)
            yield ScoreRecord(utt_id=e.utt_id, label=e.label, score=s,
                              group=ex.group), None
        except (DataError, NumericError) as exc:
            yield None, (e.utt_id, str(exc))


def extract_features(entries, out_dir: str, window: str = "hann",
                     force: bool = False) -> dict:
    """Write one MODS-kind MFX1 file per utterance.

    Existing valid files are skipped unless force; existing corrupt
    files raise. A lock file serializes writers on the directory.
    """
    os.makedirs(out_dir, exist_ok=True)
    written, skipped = [], []
    with FileLock(os.path.join(out_dir, ".modfuse.lock")):
        for e in entries:
            path = cache_path(out_dir, e.utt_id)
            if os.path.exists(path) and not force:
                _read_cached_feature(path)   # corrupt cache must not pass silently
                skipped.append(e.utt_id)
                continue
            if e.audio_path is None:
                raise ManifestError(f"{e.utt_id}: manifest entry has no audio_path")
            try:
                samples, _ = load_wav(e.audio_path)
                feature = modspec_feature(fix_length(samples, e.utt_id), window)
            except DataError as exc:
                raise type(exc)(f"{e.utt_id}: {exc}") from exc
            write_matrix(path, EmbeddingMatrix(
                utt_id=e.utt_id, values=feature.values, kind=KIND_MODSPEC,
            ))
            written.append(e.utt_id)
    return {"written": written, "skipped": skipped}
