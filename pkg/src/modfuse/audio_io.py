"""WAV loading, fixed-length clip normalization, and synthetic test audio.

Every clip in the pipeline is exactly 64,600 samples of 16 kHz mono audio
(about 4 seconds). Off-rate files are rejected, never resampled.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInputError,
    FormatError,
    ParameterError,
    RateMismatchError,
    TruncationError,
    UnsupportedEncodingError,
)

SAMPLE_RATE = 16_000
CLIP_SAMPLES = 64_600

# PCM16 scaling divisor; 32768 so that -32768 decodes to exactly -1.0
_PCM16_FULL_SCALE = 32768.0

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3


@dataclass
class AudioClip:
    """Fixed-geometry waveform: 64,600 finite samples at 16 kHz."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.shape[0] != CLIP_SAMPLES:
            raise ParameterError(
                f"clip must hold exactly {CLIP_SAMPLES} samples, "
                f"got shape {self.samples.shape}"
            )
        if self.sample_rate != SAMPLE_RATE:
            raise RateMismatchError(
                f"clip rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("clip contains non-finite samples")


def _iter_chunks(data: bytes):
    """Yield (chunk_id, payload) for each RIFF sub-chunk."""
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise TruncationError(
                f"chunk {cid!r} declares {size} bytes, file has {len(body)}"
            )
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a PCM16 or float32 WAV file as a mono float64 waveform.

    Multichannel input is averaged to mono. The waveform keeps its native
    length; pass it through fix_length to obtain an AudioClip. Files not
    sampled at 16 kHz raise RateMismatchError (no resampling in scope).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise FormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and payload is None:
            payload = body
    if fmt is None or payload is None:
        raise FormatError(f"{path}: missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise FormatError(f"{path}: zero channels")
    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], "<i2")
        samples = raw.astype(np.float64) / _PCM16_FULL_SCALE
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], "<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {audio_format} / {bits}-bit not supported "
            "(PCM16 and float32 only)"
        )

    if channels > 1:
        usable = len(samples) - len(samples) % channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)
    if rate != SAMPLE_RATE:
        raise RateMismatchError(
            f"{path}: {rate} Hz input; this pipeline is fixed at {SAMPLE_RATE} Hz"
        )
    return samples, int(rate)


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE, encoding: str = "pcm16"):
    """Write a mono WAV file (canonical 44-byte header, no extra chunks)."""
    x = np.asarray(samples, dtype=np.float64)
    if encoding == "pcm16":
        scaled = np.clip(np.round(x * _PCM16_FULL_SCALE), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
        audio_format, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = x.astype("<f4").tobytes()
        audio_format, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ParameterError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, audio_format, 1, sample_rate,
        sample_rate * block_align, block_align, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header + payload)


def fix_length(waveform, source_id: str = "") -> AudioClip:
    """Normalize a waveform to the fixed clip geometry.

    Shorter inputs get trailing zero-padding; longer inputs keep their
    first 64,600 samples.
    """
    x = np.asarray(waveform, dtype=np.float64)
    if x.ndim != 1:
        raise ParameterError(f"expected a 1-D waveform, got shape {x.shape}")
    if x.size == 0:
        raise EmptyInputError("cannot normalize an empty waveform")
    if x.size >= CLIP_SAMPLES:
        out = x[:CLIP_SAMPLES].copy()
    else:
        out = np.zeros(CLIP_SAMPLES, dtype=np.float64)
        out[: x.size] = x
    return AudioClip(samples=out, sample_rate=SAMPLE_RATE, source_id=source_id)


def synth_clip(
    kind: str,
    carrier_hz: float = 1000.0,
    mod_hz: float = 0.0,
    mod_depth: float = 0.0,
    snr_db: float | None = None,
    seed: int = 0,
    source_id: str = "",
) -> AudioClip:
    """Deterministic synthetic clip for desk-scale datasets.

    kind "am_tone": (1 + mod_depth*cos(2*pi*mod_hz*t)) * sin(2*pi*carrier_hz*t)
    plus Gaussian noise at snr_db (None or +inf means noiseless).
    kind "noise": unit-variance Gaussian noise.

    Identical arguments give bit-identical clips (counter-based Philox RNG).
    """
    if not 0.0 < carrier_hz < SAMPLE_RATE / 2:
        raise ParameterError(
            f"carrier {carrier_hz} Hz outside (0, {SAMPLE_RATE // 2}) Hz"
        )
    if not 0.0 <= mod_hz < 100.0:
        raise ParameterError(f"modulation rate {mod_hz} Hz outside [0, 100) Hz")
    if not 0.0 <= mod_depth <= 1.0:
        raise ParameterError(f"modulation depth {mod_depth} outside [0, 1]")

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    if kind == "noise":
        x = rng.standard_normal(CLIP_SAMPLES)
    elif kind == "am_tone":
        t = np.arange(CLIP_SAMPLES, dtype=np.float64) / SAMPLE_RATE
        envelope = 1.0 + mod_depth * np.cos(2.0 * np.pi * mod_hz * t)
        x = envelope * np.sin(2.0 * np.pi * carrier_hz * t)
        if snr_db is not None and math.isfinite(snr_db):
            signal_power = float(np.mean(x * x))
            noise_power = signal_power / (10.0 ** (snr_db / 10.0))
            x = x + rng.normal(0.0, math.sqrt(noise_power), CLIP_SAMPLES)
    else:
        raise ParameterError(f"unknown clip kind {kind!r}")

    sid = source_id or f"synth_{kind}_{seed}"
    return AudioClip(samples=x, sample_rate=SAMPLE_RATE, source_id=sid)
