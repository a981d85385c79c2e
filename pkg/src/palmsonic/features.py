"""The eight feature extractors.

Each extractor maps an AudioClip to a FeatureMatrix (coefficients x frames).
The four filterbank cepstra (mfcc, bfcc, lfcc, gfcc) share one pipeline and
differ only in the bank; cqcc runs on the constant-Q transform instead of
the STFT; chroma and spectral_centroid are plain STFT statistics and skip
pre-emphasis, matching their usual definitions.

All extractors are deterministic: identical (clip, config) inputs give
bitwise-identical outputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from . import dsp
from .audio_io import AudioClip, apply_window, frame_signal, pre_emphasize
from .cqt import cqt

__all__ = [
    "FEATURE_KINDS",
    "ExtractionConfig",
    "FeatureMatrix",
    "mfcc",
    "cqcc",
    "bfcc",
    "lfcc",
    "gfcc",
    "chroma",
    "mel_spectrogram",
    "spectral_centroid",
    "delta",
    "extract",
    "cepstra_from_bank",
    "dump_matrix_csv",
]

FEATURE_KINDS = (
    "mfcc",
    "cqcc",
    "bfcc",
    "lfcc",
    "gfcc",
    "chroma",
    "mel_spectrogram",
    "spectral_centroid",
)


@dataclass(frozen=True)
class ExtractionConfig:
    """Extraction constants; defaults make every documented run reproducible."""

    frame_len: int = 400
    hop_len: int = 160
    n_fft: int = 512
    window: str = "hamming"
    pre_emphasis_alpha: float = 0.97
    n_ceps: int = 20
    n_mel_filters: int = 40
    n_bark_filters: int = 40
    n_linear_filters: int = 40
    n_gammatone_filters: int = 26
    f_min: float = 20.0
    f_max: float = 7600.0
    cqt_f_min: float = 32.7
    cqt_bins_per_octave: int = 12
    cqt_n_octaves: int = 7
    log_floor: float = 1e-10
    bark_variant: str = "paper"
    append_deltas: bool = False
    delta_width: int = 2

    def __post_init__(self):
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        if self.frame_len > self.n_fft:
            raise ValueError("frame_len must not exceed n_fft")
        banks = (
            self.n_mel_filters,
            self.n_bark_filters,
            self.n_linear_filters,
            self.n_gammatone_filters,
            self.cqt_bins_per_octave * self.cqt_n_octaves,
        )
        if self.n_ceps > min(banks):
            raise ValueError("n_ceps exceeds the smallest filterbank size")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n_coeffs, n_frames)
    kind: str
    clip_id: str
    params_digest: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature values must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "values", v)

    @property
    def n_coeffs(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


# config fields each kind's digest covers (everything its pipeline reads)
_FRONT_END = ("frame_len", "hop_len", "n_fft", "window")
_DELTAS = ("append_deltas", "delta_width")
_DIGEST_FIELDS = {
    "mfcc": _FRONT_END
    + ("pre_emphasis_alpha", "n_mel_filters", "f_min", "f_max", "log_floor", "n_ceps")
    + _DELTAS,
    "bfcc": _FRONT_END
    + (
        "pre_emphasis_alpha",
        "n_bark_filters",
        "bark_variant",
        "f_min",
        "f_max",
        "log_floor",
        "n_ceps",
    )
    + _DELTAS,
    "lfcc": _FRONT_END
    + ("pre_emphasis_alpha", "n_linear_filters", "f_min", "f_max", "log_floor", "n_ceps")
    + _DELTAS,
    "gfcc": _FRONT_END
    + (
        "pre_emphasis_alpha",
        "n_gammatone_filters",
        "f_min",
        "f_max",
        "log_floor",
        "n_ceps",
    )
    + _DELTAS,
    "cqcc": (
        "hop_len",
        "cqt_f_min",
        "cqt_bins_per_octave",
        "cqt_n_octaves",
        "log_floor",
        "n_ceps",
    )
    + _DELTAS,
    "chroma": _FRONT_END + _DELTAS,
    "mel_spectrogram": _FRONT_END
    + ("pre_emphasis_alpha", "n_mel_filters", "f_min", "f_max", "log_floor")
    + _DELTAS,
    "spectral_centroid": _FRONT_END + _DELTAS,
}


def params_digest(kind: str, cfg: ExtractionConfig) -> str:
    parts = [f"kind={kind}"]
    parts += [f"{name}={getattr(cfg, name)!r}" for name in _DIGEST_FIELDS[kind]]
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def _stft_power(clip: AudioClip, cfg: ExtractionConfig, emphasize: bool) -> np.ndarray:
    """Per-frame one-sided power spectra, (n_frames, n_fft//2 + 1)."""
    if emphasize:
        clip = pre_emphasize(clip, cfg.pre_emphasis_alpha)
    frames = frame_signal(clip, cfg.frame_len, cfg.hop_len)
    if frames.n_frames == 0:
        raise ValueError(
            f"clip {clip.source_id!r} shorter than one frame "
            f"({clip.samples.size} < {cfg.frame_len} samples)"
        )
    frames = apply_window(frames, cfg.window)
    spectra = np.fft.rfft(frames.frames, n=cfg.n_fft, axis=1)
    return np.abs(spectra) ** 2


def _finalize(values: np.ndarray, kind: str, clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    m = FeatureMatrix(
        values=values,
        kind=kind,
        clip_id=clip.source_id,
        params_digest=params_digest(kind, cfg),
    )
    if cfg.append_deltas and m.n_frames >= 2:
        d = delta(m, cfg.delta_width)
        m = replace(m, values=np.vstack([m.values, d.values]))
    return m


def cepstra_from_bank(
    clip: AudioClip, cfg: ExtractionConfig, bank: dsp.Filterbank, kind: str
) -> FeatureMatrix:
    """Shared filterbank-cepstra pipeline.

    pre-emphasis -> framing -> window -> |DFT|^2 -> bank -> log with floor ->
    DCT-II -> first n_ceps coefficients per frame.
    """
    power = _stft_power(clip, cfg, emphasize=True)
    energies = power @ bank.weights.T
    logs = np.log(np.maximum(energies, cfg.log_floor))
    ceps = dsp.dct_ii(logs)[:, : cfg.n_ceps]
    return _finalize(ceps.T.copy(), kind, clip, cfg)


def _mel_bank(clip, cfg):
    return dsp.triangular_filterbank(
        "mel", cfg.n_mel_filters, cfg.n_fft, clip.sample_rate_hz, cfg.f_min, cfg.f_max
    )


def mfcc(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    return cepstra_from_bank(clip, cfg, _mel_bank(clip, cfg), "mfcc")


def bfcc(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    bank = dsp.triangular_filterbank(
        f"bark_{cfg.bark_variant}",
        cfg.n_bark_filters,
        cfg.n_fft,
        clip.sample_rate_hz,
        cfg.f_min,
        cfg.f_max,
    )
    return cepstra_from_bank(clip, cfg, bank, "bfcc")


def lfcc(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    bank = dsp.triangular_filterbank(
        "linear",
        cfg.n_linear_filters,
        cfg.n_fft,
        clip.sample_rate_hz,
        cfg.f_min,
        cfg.f_max,
    )
    return cepstra_from_bank(clip, cfg, bank, "lfcc")


def gfcc(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    bank = dsp.gammatone_filterbank(
        cfg.n_gammatone_filters, cfg.n_fft, clip.sample_rate_hz, cfg.f_min, cfg.f_max
    )
    return cepstra_from_bank(clip, cfg, bank, "gfcc")


def cqcc(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    """Constant-Q cepstra: CQT power -> log -> uniform resampling -> DCT-II.

    The K log-power values sit on geometrically spaced frequencies; they are
    linearly interpolated onto K uniformly spaced frequencies over the same
    span (endpoints fixed) before the cosine transform.
    """
    m = cqt(
        clip,
        cfg.cqt_f_min,
        cfg.cqt_bins_per_octave,
        cfg.cqt_n_octaves,
        cfg.hop_len,
    )
    logs = np.log(np.maximum(np.abs(m.values) ** 2, cfg.log_floor))
    resampled = _uniform_resample_matrix(m.bin_freqs_hz) @ logs
    ceps = dsp.dct_ii(resampled.T)[:, : cfg.n_ceps]
    return _finalize(ceps.T.copy(), "cqcc", clip, cfg)


def _uniform_resample_matrix(f_geo: np.ndarray) -> np.ndarray:
    """Linear-interpolation operator from the geometric grid f_geo onto K
    uniformly spaced frequencies with the same endpoints."""
    k = f_geo.size
    f_uni = np.linspace(f_geo[0], f_geo[-1], k)
    w = np.zeros((k, k))
    seg = np.clip(np.searchsorted(f_geo, f_uni, side="right") - 1, 0, k - 2)
    frac = (f_uni - f_geo[seg]) / (f_geo[seg + 1] - f_geo[seg])
    rows = np.arange(k)
    w[rows, seg] = 1.0 - frac
    w[rows, seg + 1] += frac
    return w


def chroma(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    """12 pitch classes (C=0 .. B=11) folded from STFT power, bins above
    27.5 Hz only, each frame normalized to peak 1."""
    power = _stft_power(clip, cfg, emphasize=False)
    freqs = np.arange(power.shape[1]) * (clip.sample_rate_hz / cfg.n_fft)
    audible = freqs > 27.5
    semitones = np.round(12.0 * np.log2(freqs[audible] / 440.0)).astype(int)
    classes = (9 + semitones) % 12  # 440 Hz is A, index 9
    out = np.zeros((12, power.shape[0]))
    for c in range(12):
        sel = classes == c
        if np.any(sel):
            out[c] = power[:, audible][:, sel].sum(axis=1)
    peaks = out.max(axis=0)
    nonzero = peaks > 0
    out[:, nonzero] /= peaks[nonzero]
    return _finalize(out, "chroma", clip, cfg)


def mel_spectrogram(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    """The mfcc pipeline truncated after the log stage (no DCT)."""
    power = _stft_power(clip, cfg, emphasize=True)
    energies = power @ _mel_bank(clip, cfg).weights.T
    logs = np.log(np.maximum(energies, cfg.log_floor))
    return _finalize(logs.T.copy(), "mel_spectrogram", clip, cfg)


def spectral_centroid(clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    """Power-weighted mean frequency per frame, in Hz; silent frames give 0."""
    power = _stft_power(clip, cfg, emphasize=False)
    freqs = np.arange(power.shape[1]) * (clip.sample_rate_hz / cfg.n_fft)
    totals = power.sum(axis=1)
    centroid = np.zeros(power.shape[0])
    live = totals > 0
    centroid[live] = (power[live] @ freqs) / totals[live]
    return _finalize(centroid[None, :], "spectral_centroid", clip, cfg)


def delta(m: FeatureMatrix, width: int) -> FeatureMatrix:
    """Regression delta over +-width frames with edge replication."""
    if width < 1:
        raise ValueError("width must be >= 1")
    if m.n_frames < 2:
        raise ValueError("delta needs at least two frames")
    padded = np.pad(m.values, ((0, 0), (width, width)), mode="edge")
    denom = 2.0 * sum(w * w for w in range(1, width + 1))
    out = np.zeros_like(m.values)
    for w in range(1, width + 1):
        out += w * (padded[:, width + w :][:, : m.n_frames] - padded[:, width - w : width - w + m.n_frames])
    out /= denom
    digest = hashlib.sha256(f"{m.params_digest};delta_width={width}".encode()).hexdigest()[:16]
    return replace(m, values=out, params_digest=digest)


_EXTRACTORS = {
    "mfcc": mfcc,
    "cqcc": cqcc,
    "bfcc": bfcc,
    "lfcc": lfcc,
    "gfcc": gfcc,
    "chroma": chroma,
    "mel_spectrogram": mel_spectrogram,
    "spectral_centroid": spectral_centroid,
}


def extract(kind: str, clip: AudioClip, cfg: ExtractionConfig) -> FeatureMatrix:
    """Dispatch to the named extractor."""
    if kind not in _EXTRACTORS:
        raise ValueError(f"unknown feature kind {kind!r}")
    return _EXTRACTORS[kind](clip, cfg)


def dump_matrix_csv(m: FeatureMatrix, path) -> None:
    """Row-major CSV dump at 17 significant digits, for oracle cross-checks."""
    with open(path, "w") as fh:
        fh.write(f"# kind={m.kind} clip={m.clip_id} digest={m.params_digest}\n")
        for row in m.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
