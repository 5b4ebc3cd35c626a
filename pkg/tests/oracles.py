"""Independent reference implementations used to freeze expected values.

Everything here is the slow, obvious route: direct O(n^2) DFT sums,
exhaustive threshold sweeps, textbook attention formulas written with
plain numpy. None of it shares code with the package paths it checks.
"""

import numpy as np

CLIP_SAMPLES = 64_600
FRAME_LEN = 400
HOP = 160
N_FRAMES = 402
N_BINS = 201
N_MOD_BINS = 202


def direct_dft(x):
    """O(n^2) DFT as the literal definition sum."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x


def periodic_window(name, n):
    k = np.arange(n, dtype=np.float64)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)
    if name == "rect":
        return np.ones(n)
    raise ValueError(name)


def direct_stft_magnitudes(samples, window="hann"):
    """Frame loop + direct DFT matrix; returns bins x frames."""
    w = periodic_window(window, FRAME_LEN)
    k = np.arange(FRAME_LEN)
    dft_matrix = np.exp(-2j * np.pi * np.outer(k, k) / FRAME_LEN)
    frames = np.stack([
        samples[t * HOP:t * HOP + FRAME_LEN] * w for t in range(N_FRAMES)
    ])
    spectrum = frames @ dft_matrix.T
    return np.abs(spectrum[:, :N_BINS]).T


def direct_modspec(samples, window="hann"):
    """Full double-direct-DFT chain; returns 201 x 202."""
    mags = direct_stft_magnitudes(samples, window)
    k = np.arange(N_FRAMES)
    dft_matrix = np.exp(-2j * np.pi * np.outer(k, k) / N_FRAMES)
    spectrum = mags @ dft_matrix.T
    return np.abs(spectrum[:, :N_MOD_BINS])


def sweep_eer(bona, fake):
    """Exhaustive threshold sweep with brute-force rate counting.

    Same definition as the package (fake >= tau is a false alarm;
    linear interpolation of the two rates where they cross between grid
    points) but every rate comes from counting the full arrays at every
    threshold.
    """
    bona = np.asarray(bona, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    grid = [-np.inf] + sorted(set(np.concatenate((bona, fake)).tolist())) + [np.inf]
    points = []
    for tau in grid:
        p_fa = np.count_nonzero(fake >= tau) / fake.size
        p_miss = np.count_nonzero(bona < tau) / bona.size
        points.append((tau, p_fa, p_miss))
    for i, (tau, p_fa, p_miss) in enumerate(points):
        d = p_fa - p_miss
        if d == 0.0:
            return p_fa, tau
        if d < 0.0:
            tau_a, fa_a, miss_a = points[i - 1]
            d_a = fa_a - miss_a
            t = d_a / (d_a - d)
            eer = (1 - t) * fa_a + t * p_fa
            if np.isfinite(tau_a) and np.isfinite(tau):
                thr = tau_a + t * (tau - tau_a)
            else:
                thr = tau_a if np.isfinite(tau_a) else tau
            return eer, thr
    raise AssertionError("rates never crossed")


def attention_reference(q, k, v):
    """softmax(q k^T / sqrt(d)) v with plain numpy."""
    logits = q @ k.T / np.sqrt(q.shape[1])
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    weights = e / e.sum(axis=1, keepdims=True)
    return weights @ v, weights


def multi_head_reference(query, ssl, layers, heads):
    """Whole fusion block from the per-head formula.

    layers: dict with numpy (weight, bias) pairs for proj/q/k/v/out.
    """
    def affine(x, name):
        w, b = layers[name]
        return x @ w + b

    projected = affine(ssl, "proj")
    q = affine(query, "q")
    k = affine(projected, "k")
    v = affine(projected, "v")
    hd = q.shape[1] // heads
    outputs = []
    for i in range(heads):
        sl = slice(i * hd, (i + 1) * hd)
        out, _ = attention_reference(q[:, sl], k[:, sl], v[:, sl])
        outputs.append(out)
    return affine(np.concatenate(outputs, axis=1), "out")
