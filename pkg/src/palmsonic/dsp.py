"""Shared transforms and filterbanks.

Frequency-scale conventions used throughout:

* mel(f)  = 2595 * log10(1 + f/700)
* bark(f), "paper" variant = 26.81*(f/1000) - 0.53*(f/1000)^2 + 4.5e-6*(f/1000)^3
* bark(f), "traunmueller" variant = max(0, 26.81*f/(1960+f) - 0.53)
* erb_rate(f) = 21.4 * log10(1 + 0.00437*f)

The "paper" bark variant grows past the classical 24-bark ceiling at high
frequencies; it is still the default because it is what the rest of the
pipeline is calibrated against. The traunmueller variant is selectable
through configuration wherever a bark bank is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

__all__ = [
    "ComplexSpectrum",
    "Filterbank",
    "fft_real",
    "power_spectrum",
    "dct_ii",
    "dct_iii",
    "hz_to_mel",
    "mel_to_hz",
    "hz_to_bark",
    "bark_to_hz",
    "hz_to_erb_rate",
    "erb_rate_to_hz",
    "triangular_filterbank",
    "gammatone_filterbank",
]


@dataclass(frozen=True)
class ComplexSpectrum:
    """One-sided DFT: bins[b] is the component at b * sample_rate_hz / n_fft."""

    bins: np.ndarray
    n_fft: int
    sample_rate_hz: int

    def bin_freqs_hz(self) -> np.ndarray:
        return np.arange(self.bins.size) * (self.sample_rate_hz / self.n_fft)


@dataclass(frozen=True)
class Filterbank:
    """Non-negative filter rows over one-sided spectrum bins."""

    weights: np.ndarray  # (n_filters, n_spectrum_bins)
    centers_hz: np.ndarray
    scale: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        c = np.asarray(self.centers_hz, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("filterbank weights must be non-negative")
        if np.any(np.diff(c) <= 0):
            raise ValueError("filter centers must be strictly increasing")
        if np.any(w.max(axis=1) <= 0):
            raise ValueError("every filter row needs a positive weight")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers_hz", c)

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


def fft_real(frame: np.ndarray, n_fft: int, sample_rate_hz: int = 0) -> ComplexSpectrum:
    """One-sided DFT of a real frame, zero-padded up to n_fft.

    n_fft must be a power of two and at least the frame length.
    """
    if n_fft < 1 or (n_fft & (n_fft - 1)) != 0:
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size > n_fft:
        raise ValueError(f"frame length {frame.size} exceeds n_fft {n_fft}")
    bins = np.fft.rfft(frame, n=n_fft)
    return ComplexSpectrum(bins=bins, n_fft=n_fft, sample_rate_hz=sample_rate_hz)


def power_spectrum(spec: ComplexSpectrum) -> np.ndarray:
    """Per-bin squared magnitude."""
    return np.abs(spec.bins) ** 2


def dct_ii(v: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II.

    C(p) = s(p) * sum_{l=1..L} v(l) * cos(p*(l-1/2)*pi/L) with s(0)=sqrt(1/L)
    and s(p>0)=sqrt(2/L). Accepts 1-D vectors or 2-D arrays (transform runs
    along the last axis).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] < 1:
        raise ValueError("dct_ii input must be non-empty")
    return scipy.fft.dct(v, type=2, norm="ortho", axis=-1)


def dct_iii(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct_ii` (orthonormal DCT-III)."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape[-1] < 1:
        raise ValueError("dct_iii input must be non-empty")
    return scipy.fft.dct(c, type=3, norm="ortho", axis=-1)


def hz_to_mel(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def hz_to_bark(f, variant: str = "paper") -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    if variant == "paper":
        u = f / 1000.0
        return 26.81 * u - 0.53 * u**2 + 4.5e-6 * u**3
    if variant == "traunmueller":
        return np.maximum(0.0, 26.81 * f / (1960.0 + f) - 0.53)
    raise ValueError(f"unknown bark variant {variant!r}")


def bark_to_hz(z, variant: str = "paper") -> np.ndarray:
    """Inverse of hz_to_bark.

    The paper cubic is only increasing up to ~25.2 kHz, so its numeric
    inverse is restricted to that range; audio use stays far below it. The
    traunmueller inverse is closed-form and maps z=0 to the clamp edge.
    """
    z = np.asarray(z, dtype=np.float64)
    if variant == "traunmueller":
        zz = z + 0.53
        return 1960.0 * zz / (26.81 - zz)
    if variant != "paper":
        raise ValueError(f"unknown bark variant {variant!r}")
    return _invert_increasing(lambda f: hz_to_bark(f, "paper"), z, 0.0, 25200.0)


def hz_to_erb_rate(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    return 21.4 * np.log10(1.0 + 0.00437 * f)


def erb_rate_to_hz(e) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    return (10.0 ** (e / 21.4) - 1.0) / 0.00437


def _invert_increasing(fn, targets, lo: float, hi: float) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.float64)
    flat = np.atleast_1d(targets)
    lo_v = np.full(flat.shape, lo)
    hi_v = np.full(flat.shape, hi)
    for _ in range(80):  # bisection; interval shrinks below fp resolution
        mid = 0.5 * (lo_v + hi_v)
        below = fn(mid) < flat
        lo_v = np.where(below, mid, lo_v)
        hi_v = np.where(below, hi_v, mid)
    return (0.5 * (lo_v + hi_v)).reshape(targets.shape)


_SCALE_FWD = {
    "mel": hz_to_mel,
    "bark_paper": lambda f: hz_to_bark(f, "paper"),
    "bark_traunmueller": lambda f: hz_to_bark(f, "traunmueller"),
    "linear": lambda f: np.asarray(f, dtype=np.float64),
}

_SCALE_INV = {
    "mel": mel_to_hz,
    "bark_paper": lambda z: bark_to_hz(z, "paper"),
    "bark_traunmueller": lambda z: bark_to_hz(z, "traunmueller"),
    "linear": lambda f: np.asarray(f, dtype=np.float64),
}


def triangular_filterbank(
    scale: str,
    n_filters: int,
    n_fft: int,
    sample_rate_hz: int,
    f_min: float,
    f_max: float,
) -> Filterbank:
    """Triangular bank with break points equally spaced on the chosen scale.

    n_filters + 2 break points span [scale(f_min), scale(f_max)]; filter i is
    the triangle over break points (i, i+1, i+2) rasterized onto FFT bins,
    apex weight exactly 1 at the bin nearest the center.
    """
    if scale not in _SCALE_FWD:
        raise ValueError(f"unknown scale {scale!r}")
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    if not 0 <= f_min < f_max:
        raise ValueError("need 0 <= f_min < f_max")
    if f_max > sample_rate_hz / 2:
        raise ValueError(f"f_max {f_max} beyond Nyquist {sample_rate_hz / 2}")

    pts = np.linspace(_SCALE_FWD[scale](f_min), _SCALE_FWD[scale](f_max), n_filters + 2)
    break_hz = np.asarray(_SCALE_INV[scale](pts), dtype=np.float64)
    n_bins = n_fft // 2 + 1
    bin_width = sample_rate_hz / n_fft
    break_bins = np.minimum(np.round(break_hz / bin_width).astype(int), n_bins - 1)

    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, mid, hi = break_bins[i], break_bins[i + 1], break_bins[i + 2]
        for b in range(lo, mid):
            weights[i, b] = (b - lo) / (mid - lo)
        for b in range(mid, hi):
            weights[i, b] = (hi - b) / (hi - mid)
        weights[i, mid] = 1.0  # apex survives even if break points collide
    return Filterbank(weights=weights, centers_hz=break_hz[1:-1], scale=scale)


def gammatone_filterbank(
    n_filters: int,
    n_fft: int,
    sample_rate_hz: int,
    f_min: float,
    f_max: float,
) -> Filterbank:
    """4th-order gammatone magnitude responses at ERB-spaced centers.

    Row i samples |H(f)| = [1 + ((f - fc)/b)^2]^(-2) with b = 1.019*ERB(fc),
    ERB(fc) = 24.7*(1 + 4.37*fc/1000), then peak-normalizes to 1.
    """
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    if not 0 <= f_min < f_max:
        raise ValueError("need 0 <= f_min < f_max")
    if f_max > sample_rate_hz / 2:
        raise ValueError(f"f_max {f_max} beyond Nyquist {sample_rate_hz / 2}")

    pts = np.linspace(hz_to_erb_rate(f_min), hz_to_erb_rate(f_max), n_filters + 2)
    centers = np.asarray(erb_rate_to_hz(pts[1:-1]), dtype=np.float64)
    freqs = np.arange(n_fft // 2 + 1) * (sample_rate_hz / n_fft)

    erb = 24.7 * (1.0 + 4.37 * centers / 1000.0)
    b = 1.019 * erb
    rel = (freqs[None, :] - centers[:, None]) / b[:, None]
    weights = (1.0 + rel**2) ** -2.0
    weights /= weights.max(axis=1, keepdims=True)
    return Filterbank(weights=weights, centers_hz=centers, scale="gammatone")
