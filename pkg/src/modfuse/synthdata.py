"""Deterministic synthetic desk-scale dataset.

Bonafide clips are 8 Hz AM tones, fake clips 40 Hz AM tones, each with a
randomized carrier. Embedding stand-ins are class-conditioned Gaussian
matrices in the same MFX1 container the real exporter emits: bonafide
mean +offset/2, fake mean -offset/2. Languages rotate over a small list
so grouped-EER reports have something to group by.
"""

from __future__ import annotations

import os

import numpy as np

from .audio_io import synth_clip, write_wav
from .embeddings import KIND_SSL, SSL_DIM, EmbeddingMatrix, write_matrix
from .errors import ParameterError
from .modspec import N_BINS
from .protocol import LABEL_BONAFIDE, LABEL_FAKE, ProtocolEntry, write_manifest

BONAFIDE_MOD_HZ = 8.0
FAKE_MOD_HZ = 40.0
EMBED_ROWS = N_BINS   # 201-step sequences, matching the real exporter

_LANGUAGES = ("en", "de", "es", "ru")


def synthetic_embedding(utt_id: str, label: str, seed: int,
                        offset: float = 0.4) -> EmbeddingMatrix:
    """Class-conditioned Gaussian embedding, written float32 on disk."""
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [seed, 0x5E], dtype=np.uint64)))
    mean = offset / 2.0 if label == LABEL_BONAFIDE else -offset / 2.0
    values = rng.normal(mean, 1.0, size=(EMBED_ROWS, SSL_DIM)).astype(np.float32)
    return EmbeddingMatrix(utt_id=utt_id, values=values, kind=KIND_SSL)


def build_synthetic_dataset(out_dir: str, n_train: int = 200, n_dev: int = 80,
                            n_eval: int = 80, seed: int = 7,
                            embed_offset: float = 0.4,
                            snr_db: float = 25.0) -> dict:
    """Write wavs, embeddings, and one manifest per split.

    Returns {"train": path, "dev": path, "eval": path}. Fully determined
    by (sizes, seed, embed_offset, snr_db).
    """
    if min(n_train, n_dev, n_eval) < 2:
        raise ParameterError("each split needs at least 2 utterances")
    wav_dir = os.path.join(out_dir, "wav")
    emb_dir = os.path.join(out_dir, "emb")
    os.makedirs(wav_dir, exist_ok=True)
    os.makedirs(emb_dir, exist_ok=True)

    carrier_rng = np.random.Generator(np.random.Philox(key=np.array(
        [seed, 0xCA], dtype=np.uint64)))
    manifests = {}
    counter = 0
    for split, count in (("train", n_train), ("dev", n_dev), ("eval", n_eval)):
        entries = []
        for i in range(count):
            label = LABEL_BONAFIDE if i % 2 == 0 else LABEL_FAKE
            utt = f"{split}_{i:04d}"
            carrier = float(carrier_rng.uniform(500.0, 3500.0))
            clip = synth_clip(
                "am_tone",
                carrier_hz=carrier,
                mod_hz=BONAFIDE_MOD_HZ if label == LABEL_BONAFIDE else FAKE_MOD_HZ,
                mod_depth=1.0,
                snr_db=snr_db,
                seed=seed * 1_000_003 + counter,
                source_id=utt,
            )
            wav_path = os.path.join(wav_dir, f"{utt}.wav")
            emb_path = os.path.join(emb_dir, f"{utt}.mfx")
            write_wav(wav_path, clip.samples)
            write_matrix(emb_path, synthetic_embedding(
                utt, label, seed=seed * 1_000_003 + counter, offset=embed_offset,
            ))
            entries.append(ProtocolEntry(
                utt_id=utt,
                label=label,
                language=_LANGUAGES[i % len(_LANGUAGES)],
                audio_path=wav_path,
                embedding_path=emb_path,
            ))
            counter += 1
        manifest_path = os.path.join(out_dir, f"{split}.tsv")
        write_manifest(manifest_path, entries)
        manifests[split] = manifest_path
    return manifests
