"""Minimal 16 kHz WAV reading with the pipeline's fixed-length semantics:
trailing zero-pad shorter clips, keep the first 64,600 samples of longer
ones."""

import struct

import numpy as np

from .errors import AudioError

SAMPLE_RATE = 16_000
CLIP_SAMPLES = 64_600


def load_wav_16k(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioError(f"{path}: not a RIFF/WAVE file")
    fmt = payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt " and fmt is None:
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and payload is None:
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise AudioError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _, _, bits = fmt
    if audio_format == 1 and bits == 16:
        samples = np.frombuffer(
            payload[: len(payload) - len(payload) % 2], "<i2"
        ).astype(np.float32) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(
            payload[: len(payload) - len(payload) % 4], "<f4"
        ).astype(np.float32)
    else:
        raise AudioError(f"{path}: unsupported format {audio_format}/{bits}-bit")
    if channels > 1:
        usable = len(samples) - len(samples) % channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)
    if rate != SAMPLE_RATE:
        raise AudioError(f"{path}: {rate} Hz, exporter requires {SAMPLE_RATE} Hz")
    return samples.astype(np.float32)


def fix_clip_length(samples: np.ndarray) -> np.ndarray:
    if samples.size == 0:
        raise AudioError("empty waveform")
    if samples.size >= CLIP_SAMPLES:
        return samples[:CLIP_SAMPLES]
    out = np.zeros(CLIP_SAMPLES, dtype=samples.dtype)
    out[: samples.size] = samples
    return out
