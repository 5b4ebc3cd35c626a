"""STFT and modulation spectrogram with the fixed 25 ms / 10 ms geometry.

The feature is computed in two stages. A 400-point magnitude STFT over
64,600 samples with hop 160 gives 201 frequency bins by 402 frames. A
second 402-point DFT along time, applied to each bin's magnitude
trajectory, gives the 201 x 202 modulation spectrogram: acoustic
frequency down the rows (40 Hz per bin), modulation frequency across the
columns (100/402 ~ 0.2488 Hz per bin). No centering or reflection
padding anywhere; the first frame starts at sample 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip
from .errors import EmptyInputError, GeometryError, ParameterError, ShapeError

FRAME_LEN = 400          # 25 ms at 16 kHz
HOP = 160                # 10 ms
N_FFT = FRAME_LEN        # no zero-padding inside the frame
N_FRAMES = (CLIP_SAMPLES - FRAME_LEN) // HOP + 1   # 402
N_BINS = N_FFT // 2 + 1                            # 201
N_MOD_FFT = N_FRAMES                                # second transform length
N_MOD_BINS = N_MOD_FFT // 2 + 1                     # 202
FRAME_RATE = SAMPLE_RATE / HOP                      # 100 frames per second


def window(name: str, n: int = FRAME_LEN) -> np.ndarray:
    """Periodic analysis window. Periodic (DFT-even) so the Hann window
    sums to exactly n/2."""
    k = np.arange(n, dtype=np.float64)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)
    if name == "rect":
        return np.ones(n, dtype=np.float64)
    raise ParameterError(f"unknown window {name!r}")


@dataclass
class Stft:
    """Magnitude STFT, 201 bins x 402 frames."""

    magnitudes: np.ndarray
    frame_len: int = FRAME_LEN
    hop: int = HOP
    n_fft: int = N_FFT
    window: str = "hann"

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.shape != (N_BINS, N_FRAMES):
            raise GeometryError(
                f"STFT must be {N_BINS}x{N_FRAMES}, got {m.shape}"
            )
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ShapeError("STFT magnitudes must be finite and nonnegative")
        self.magnitudes = m


@dataclass
class ModSpectrogram:
    """201 acoustic-frequency rows x 202 modulation-frequency columns."""

    values: np.ndarray
    n_mod_fft: int = N_MOD_FFT
    freq_axis_hz: np.ndarray = field(
        default_factory=lambda: np.arange(N_BINS) * (SAMPLE_RATE / N_FFT)
    )
    modfreq_axis_hz: np.ndarray = field(
        default_factory=lambda: np.arange(N_MOD_BINS) * (FRAME_RATE / N_MOD_FFT)
    )

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_BINS, N_MOD_BINS):
            raise GeometryError(
                f"modulation spectrogram must be {N_BINS}x{N_MOD_BINS}, got {v.shape}"
            )
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ShapeError("modulation spectrogram must be finite and nonnegative")
        self.values = v

    def log1p_view(self) -> np.ndarray:
        """Optional log-compressed view of the feature; the raw transform
        chain stays the default everywhere."""
        return np.log1p(self.values)


def stft(clip: AudioClip, window_name: str = "hann") -> Stft:
    """Magnitude STFT of a normalized clip.

    Frame t covers samples [160*t, 160*t + 400); all 402 frames fit the
    64,600-sample clip exactly, so no frame sees padding.
    """
    w = window(window_name)
    idx = HOP * np.arange(N_FRAMES)[:, None] + np.arange(FRAME_LEN)[None, :]
    frames = clip.samples[idx] * w
    spectrum = np.fft.rfft(frames, axis=1)
    return Stft(magnitudes=np.abs(spectrum).T, window=window_name)


def dft_any_length(x, n: int) -> np.ndarray:
    """Exact-length DFT for arbitrary n (402 is not a power of two).

    Backed by numpy's pocketfft, which decomposes composite lengths
    mixed-radix and falls back to Bluestein for large prime factors;
    agrees with the direct O(n^2) sum to ~1e-9 relative error for
    n <= 4096.
    """
    if n == 0:
        raise EmptyInputError("zero-length DFT")
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] != n:
        raise ShapeError(f"expected a length-{n} vector, got shape {x.shape}")
    return np.fft.fft(x)


def modulation_spectrogram(s: Stft) -> ModSpectrogram:
    """Second transform of the feature chain.

    For each acoustic-frequency row, take a 402-point DFT (no window, no
    zero-padding) of the magnitude trajectory over time and keep the
    magnitude of bins 0..201. The DC column is retained; it carries the
    overall spectral energy of the bin.
    """
    mags = s.magnitudes
    if mags.shape[1] != N_MOD_FFT:
        raise GeometryError(
            f"second transform needs {N_MOD_FFT} frames, got {mags.shape[1]}"
        )
    out = np.empty((N_BINS, N_MOD_BINS), dtype=np.float64)
    for i in range(N_BINS):
        spectrum = dft_any_length(mags[i], N_MOD_FFT)
        out[i] = np.abs(spectrum[:N_MOD_BINS])
    return ModSpectrogram(values=out)


def modspec_feature(clip: AudioClip, window_name: str = "hann") -> ModSpectrogram:
    """Full chain: clip -> STFT -> modulation spectrogram."""
    return modulation_spectrogram(stft(clip, window_name))
