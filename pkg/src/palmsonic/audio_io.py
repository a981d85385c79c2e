"""WAV ingestion, normalization, and framing.

All downstream extractors consume :class:`AudioClip` (mono, [-1, 1]) and
:class:`FrameSequence` values produced here. Everything in this module is a
pure function of its inputs, so batch callers can process clips in parallel
without coordination.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "AudioClip",
    "FrameSequence",
    "WavFormatError",
    "UnsupportedEncodingError",
    "load_wav",
    "write_wav",
    "resample",
    "pre_emphasize",
    "frame_signal",
    "apply_window",
]


class WavFormatError(ValueError):
    """Raised for malformed RIFF/WAVE containers or empty audio payloads."""


class UnsupportedEncodingError(WavFormatError):
    """Raised for codecs outside PCM 8/16/24/32-bit and 32-bit float."""


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer with its sample rate.

    samples is a float64 array normalized to [-1, 1]. clipped records whether
    a processing stage had to clamp values back into range.
    """

    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""
    clipped: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("AudioClip needs a non-empty 1-D sample buffer")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        if np.max(np.abs(samples)) > 1.0 + 1e-12:
            raise ValueError("AudioClip samples must lie in [-1, 1]")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSequence:
    """Stacked analysis frames: one row per frame, frame_len columns."""

    frames: np.ndarray
    frame_len: int
    hop_len: int
    sample_rate_hz: int
    window_applied: str = "none"

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.frame_len:
            raise ValueError("frames must be (n_frames, frame_len)")
        if self.frame_len < 2 or self.hop_len < 1:
            raise ValueError("frame_len >= 2 and hop_len >= 1 required")
        if self.window_applied not in ("none", "hamming", "hann"):
            raise ValueError(f"unknown window state {self.window_applied!r}")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a normalized mono AudioClip.

    Accepts PCM 8/16/24/32-bit and 32-bit float payloads with any channel
    count. Channels are averaged to mono; integer samples are scaled to
    [-1, 1] by the full-scale value of the encoding.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt_body = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            fmt_body = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt_body is None or data is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    if len(fmt_body) < 16:
        raise WavFormatError(f"{path}: truncated fmt chunk")

    audio_format, n_channels, sample_rate, _, _, bits = struct.unpack_from(
        "<HHIIHH", fmt_body, 0
    )
    if audio_format == _WAVE_FORMAT_EXTENSIBLE:
        # the real format tag leads the sub-format GUID at offset 24
        if len(fmt_body) < 26:
            raise WavFormatError(f"{path}: truncated extensible fmt chunk")
        (audio_format,) = struct.unpack_from("<H", fmt_body, 24)
    if n_channels < 1 or sample_rate <= 0:
        raise WavFormatError(f"{path}: invalid channel count or sample rate")

    if audio_format == _WAVE_FORMAT_PCM:
        if bits == 8:
            x = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
            x = (x - 128.0) / 128.0
        elif bits == 16:
            x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
        elif bits == 24:
            x = _decode_pcm24(data) / float(2**23)
        elif bits == 32:
            x = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(2**31)
        else:
            raise UnsupportedEncodingError(f"{path}: {bits}-bit PCM not supported")
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncodingError(f"{path}: {bits}-bit float not supported")
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"{path}: format tag 0x{audio_format:04x} not supported")

    if x.size == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    usable = (x.size // n_channels) * n_channels
    x = x[:usable].reshape(-1, n_channels).mean(axis=1)
    if x.size == 0:
        raise WavFormatError(f"{path}: no complete sample frames")
    x = np.clip(x, -1.0, 1.0)
    return AudioClip(samples=x, sample_rate_hz=int(sample_rate), source_id=path.stem)


def _decode_pcm24(data: bytes) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    b = b[: (b.size // 3) * 3].reshape(-1, 3).astype(np.int64)
    val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
    val = np.where(val >= 2**23, val - 2**24, val)
    return val.astype(np.float64)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM little-endian WAV (test fixtures, synth)."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH",
        16,
        _WAVE_FORMAT_PCM,
        1,
        clip.sample_rate_hz,
        clip.sample_rate_hz * 2,
        2,
        16,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    """Linear-interpolation resampling to target_hz.

    Identity (bit-equal) when the target matches the source rate. Output
    length is round(n * target_hz / source_hz).
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == clip.sample_rate_hz:
        return clip
    n = clip.samples.size
    m = int(round(n * target_hz / clip.sample_rate_hz))
    src_pos = np.arange(m, dtype=np.float64) * (clip.sample_rate_hz / target_hz)
    out = np.interp(src_pos, np.arange(n, dtype=np.float64), clip.samples)
    return replace(clip, samples=out, sample_rate_hz=int(target_hz))


def pre_emphasize(clip: AudioClip, alpha: float) -> AudioClip:
    """First-difference pre-emphasis: y(0)=x(0), y(n)=x(n) - alpha*x(n-1)."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    x = clip.samples
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    clipped = bool(np.max(np.abs(y)) > 1.0)
    if clipped:
        y = np.clip(y, -1.0, 1.0)
    return replace(clip, samples=y, clipped=clip.clipped or clipped)


def frame_signal(clip: AudioClip, frame_len: int, hop_len: int) -> FrameSequence:
    """Slice the clip into overlapping frames; trailing partials are dropped."""
    if frame_len < 2:
        raise ValueError("frame_len must be >= 2")
    if hop_len < 1:
        raise ValueError("hop_len must be >= 1")
    x = clip.samples
    n = x.size
    if n < frame_len:
        frames = np.empty((0, frame_len), dtype=np.float64)
    else:
        n_frames = (n - frame_len) // hop_len + 1
        idx = np.arange(frame_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
        frames = x[idx]
    return FrameSequence(
        frames=frames,
        frame_len=frame_len,
        hop_len=hop_len,
        sample_rate_hz=clip.sample_rate_hz,
    )


def periodic_window(kind: str, length: int) -> np.ndarray:
    """Periodic (DFT-even) Hamming or Hann window of the given length."""
    n = np.arange(length, dtype=np.float64)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / length)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    raise ValueError(f"unknown window kind {kind!r}")


def apply_window(frames: FrameSequence, kind: str) -> FrameSequence:
    """Multiply every frame by the periodic window of the frame length."""
    if frames.window_applied != "none":
        raise ValueError(f"frames already windowed with {frames.window_applied!r}")
    w = periodic_window(kind, frames.frame_len)
    return replace(frames, frames=frames.frames * w[None, :], window_applied=kind)
