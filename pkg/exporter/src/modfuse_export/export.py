"""Embedding export: real XLS-R inference and the synthetic stand-in.

Real export runs the pretrained wav2vec 2.0 XLS-R (0.3B) encoder in
inference mode over fixed 64,600-sample clips and writes one SSLE-kind
MFX1 file per utterance, 201 x 1024 float32, plus a sidecar
integrity.tsv of utt_id -> sha256 of the payload bytes. The model is
never fine-tuned here; downstream layers train in the pipeline.
"""

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .audio import fix_clip_length, load_wav_16k
from .container import payload_sha256, write_matrix_file
from .errors import EnvironmentError_, GeometryError, ManifestError
from .manifest import read_manifest

DEFAULT_MODEL = "facebook/wav2vec2-xls-r-300m"
EXPECTED_FRAMES = 201
EXPECTED_DIM = 1024


@dataclass
class ExportJob:
    manifest: str
    out_dir: str
    model: str = DEFAULT_MODEL
    device: str = "cpu"
    batch_size: int = 4
    layer: int = -1   # hidden-state index; -1 = final layer

    def __post_init__(self):
        if self.batch_size < 1:
            raise ManifestError("batch size must be >= 1")


def _load_model(identifier: str, device: str):
    try:
        import torch
        from transformers import Wav2Vec2Model
    except ImportError as exc:
        raise EnvironmentError_(
            f"real export needs torch and transformers: {exc}"
        ) from exc
    try:
        model = Wav2Vec2Model.from_pretrained(identifier)
    except Exception as exc:
        raise EnvironmentError_(
            f"cannot resolve model {identifier!r}: {exc}"
        ) from exc
    model.eval()
    model.to(device)
    torch.set_num_threads(1)   # byte-identical re-export
    return torch, model


def _write_integrity(out_dir: str, hashes: dict[str, str]):
    path = os.path.join(out_dir, "integrity.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("utt_id\tsha256\n")
        for utt, digest in hashes.items():
            fh.write(f"{utt}\t{digest}\n")
    return path


def export_embeddings(job: ExportJob) -> dict[str, str]:
    """Run the SSL encoder over every manifest row with an audio path.

    Returns utt_id -> sha256 of the written payload. Aborts loudly if the
    encoder output is not 201 x 1024 (wrong stride or width).
    """
    rows = read_manifest(job.manifest)
    os.makedirs(job.out_dir, exist_ok=True)
    torch, model = _load_model(job.model, job.device)

    stride = 1
    for s in model.config.conv_stride:
        stride *= s

    hashes: dict[str, str] = {}
    with torch.no_grad():
        for start in range(0, len(rows), job.batch_size):
            batch = rows[start:start + job.batch_size]
            clips = []
            for row in batch:
                if row.audio_path is None:
                    raise ManifestError(f"{row.utt_id}: no audio_path")
                clips.append(fix_clip_length(load_wav_16k(row.audio_path)))
            inputs = torch.from_numpy(np.stack(clips)).to(job.device)
            out = model(inputs, output_hidden_states=True)
            hidden = out.hidden_states[job.layer]
            got = tuple(hidden.shape[1:])
            if got != (EXPECTED_FRAMES, EXPECTED_DIM):
                raise GeometryError(
                    f"model emits {got[0]}x{got[1]} for 64,600-sample input "
                    f"(total conv stride {stride}); pipeline requires "
                    f"{EXPECTED_FRAMES}x{EXPECTED_DIM}"
                )
            values = hidden.cpu().numpy().astype(np.float32)
            for row, matrix in zip(batch, values):
                path = os.path.join(job.out_dir, f"{row.utt_id}.mfx")
                hashes[row.utt_id] = write_matrix_file(path, row.utt_id, matrix)
    _write_integrity(job.out_dir, hashes)
    return hashes


def export_synthetic(manifest: str, out_dir: str, seed: int = 0,
                     offset: float = 0.4) -> dict[str, str]:
    """Class-conditioned Gaussian stand-ins in the same container:
    bonafide mean +offset/2, fake mean -offset/2, unit variance."""
    rows = read_manifest(manifest)
    os.makedirs(out_dir, exist_ok=True)
    hashes: dict[str, str] = {}
    for i, row in enumerate(rows):
        rng = np.random.Generator(np.random.Philox(
            key=np.array([seed, i], dtype=np.uint64)))
        mean = offset / 2.0 if row.label == "bonafide" else -offset / 2.0
        values = rng.normal(mean, 1.0, size=(EXPECTED_FRAMES, EXPECTED_DIM))
        path = os.path.join(out_dir, f"{row.utt_id}.mfx")
        hashes[row.utt_id] = write_matrix_file(
            path, row.utt_id, values.astype(np.float32))
    _write_integrity(out_dir, hashes)
    return hashes


def verify_integrity(out_dir: str) -> bool:
    """Re-hash every exported payload against the sidecar TSV."""
    path = os.path.join(out_dir, "integrity.tsv")
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            utt, digest = line.rstrip("\n").split("\t")
            blob = open(os.path.join(out_dir, f"{utt}.mfx"), "rb").read()
            # payload starts after the 22-byte fixed header + utt bytes
            payload = blob[22 + len(utt.encode("utf-8")):]
            if hashlib.sha256(payload).hexdigest() != digest:
                return False
    return True
