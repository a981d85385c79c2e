"""Constant-Q transform by direct inner products.

Bin k has center frequency f_k = f_min * 2^(k/n) for n bins per octave, a
constant quality factor Q = 1/(2^(1/n) - 1), and a window of N_k =
round(Q * f_s / f_k) samples. Each output value is the inner product of the
signal around the frame center with a Hann-enveloped complex exponential,
normalized by the window's sum, with out-of-range samples treated as zero.

Two backends compute the identical sums: a compiled kernel
(palmsonic._cqtcore, built from Cython) and a pure-numpy fallback. The
backend is chosen at import time; `backend="numpy"` / `backend="ext"`
forces one, which is how the test suite cross-checks them and how
benchmarks/bench_cqt.py compares their speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip

try:
    from . import _cqtcore

    HAVE_EXT = True
except ImportError:  # extension not built; numpy path is used
    _cqtcore = None
    HAVE_EXT = False

__all__ = ["CqtMatrix", "cqt", "HAVE_EXT"]

_FRAME_CHUNK = 256  # frames gathered per matvec in the numpy backend


@dataclass(frozen=True)
class CqtMatrix:
    """Complex constant-Q coefficients, bins by frames."""

    values: np.ndarray  # (K, n_frames) complex128
    bin_freqs_hz: np.ndarray  # geometric f_k
    bandwidths_hz: np.ndarray  # f_k / Q
    bins_per_octave: int
    q_factor: float
    window_lengths: np.ndarray  # N_k per bin, non-increasing in k
    sample_rate_hz: int
    hop_len: int

    def validate(self) -> None:
        f = self.bin_freqs_hz
        ratio = f / self.bandwidths_hz
        if np.max(np.abs(ratio - self.q_factor)) > 1e-9 * self.q_factor:
            raise AssertionError("constant-Q ratio drifted")
        step = 2.0 ** (1.0 / self.bins_per_octave)
        if np.max(np.abs(f[1:] / f[:-1] - step)) > 1e-12 * step:
            raise AssertionError("bin spacing is not geometric")
        if np.any(np.diff(self.window_lengths) > 0):
            raise AssertionError("window lengths must not increase with k")

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def _build_kernels(f_k, n_k, sample_rate_hz):
    """Per-bin conjugated, sum-normalized Hann-enveloped exponentials."""
    kernels = []
    for fk, nk in zip(f_k, n_k):
        half = int(nk) // 2
        taps = np.arange(2 * half + 1, dtype=np.float64)
        t = taps - half + nk / 2.0  # basis argument j - n + N_k/2
        env = 0.5 - 0.5 * np.cos(2.0 * np.pi * t / nk)
        norm = env.sum()
        phase = -2.0 * np.pi * t * (fk / sample_rate_hz)
        kernels.append((env / norm) * np.exp(1j * phase))
    return kernels


def cqt(
    clip: AudioClip,
    f_min: float,
    bins_per_octave: int,
    n_octaves: int,
    hop_len: int,
    backend: str = "auto",
) -> CqtMatrix:
    """Constant-Q transform of a clip with frame centers every hop_len samples."""
    if f_min <= 0:
        raise ValueError("f_min must be positive")
    if bins_per_octave < 1:
        raise ValueError("bins_per_octave must be >= 1")
    if n_octaves < 1:
        raise ValueError("n_octaves must be >= 1")
    if hop_len < 1:
        raise ValueError("hop_len must be >= 1")
    fs = clip.sample_rate_hz
    if f_min * 2.0**n_octaves > fs / 2:
        raise ValueError("top octave exceeds Nyquist")

    n = bins_per_octave
    k_count = bins_per_octave * n_octaves
    f_k = f_min * 2.0 ** (np.arange(k_count) / n)
    q = 1.0 / (2.0 ** (1.0 / n) - 1.0)
    n_k = np.round(q * fs / f_k).astype(np.int64)

    x = clip.samples
    if n_k[0] > x.size:
        raise ValueError(
            f"clip too short for f_min {f_min} Hz: lowest bin needs "
            f"{int(n_k[0])} samples, clip has {x.size}"
        )

    n_frames = 1 + (x.size - 1) // hop_len
    kernels = _build_kernels(f_k, n_k, fs)
    halves = n_k // 2
    pad = int(halves[0])
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])

    if backend == "auto":
        backend = "ext" if HAVE_EXT else "numpy"
    if backend == "ext":
        if not HAVE_EXT:
            raise RuntimeError("compiled CQT kernel not built")
        values = _cqt_ext(xp, kernels, halves, pad, hop_len, n_frames)
    elif backend == "numpy":
        values = _cqt_numpy(xp, kernels, halves, pad, hop_len, n_frames)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    out = CqtMatrix(
        values=values,
        bin_freqs_hz=f_k,
        bandwidths_hz=f_k / q,
        bins_per_octave=bins_per_octave,
        q_factor=q,
        window_lengths=n_k,
        sample_rate_hz=fs,
        hop_len=hop_len,
    )
    out.validate()
    return out


def _cqt_numpy(xp, kernels, halves, pad, hop_len, n_frames):
    values = np.empty((len(kernels), n_frames), dtype=np.complex128)
    centers = pad + hop_len * np.arange(n_frames)
    for k, kernel in enumerate(kernels):
        taps = kernel.size
        kr, ki = kernel.real.copy(), kernel.imag.copy()
        starts = centers - int(halves[k])
        row = values[k]
        for lo in range(0, n_frames, _FRAME_CHUNK):
            hi = min(lo + _FRAME_CHUNK, n_frames)
            idx = starts[lo:hi, None] + np.arange(taps)[None, :]
            seg = xp[idx]
            row[lo:hi] = seg @ kr + 1j * (seg @ ki)
    return values


def _cqt_ext(xp, kernels, halves, pad, hop_len, n_frames):
    taps = np.array([k.size for k in kernels], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(taps)[:-1]]).astype(np.int64)
    flat_r = np.ascontiguousarray(np.concatenate([k.real for k in kernels]))
    flat_i = np.ascontiguousarray(np.concatenate([k.imag for k in kernels]))
    starts = (pad - halves).astype(np.int64)
    values = np.empty((len(kernels), n_frames), dtype=np.complex128)
    out_ri = values.view(np.float64).reshape(len(kernels), n_frames, 2)
    _cqtcore.direct_cqt(
        xp, flat_r, flat_i, offsets, taps, starts, int(hop_len), out_ri
    )
    return values
