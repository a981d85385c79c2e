"""Axis-free feature images and their horizontal fusion.

Every feature matrix renders to a fixed 224 x 224 RGB canvas: min-max
normalization, nearest-neighbor resize (coefficient index ascending upward),
then a colormap. Constituent images of one clip concatenate horizontally in
the configured feature order, giving a 224 x (224*m) classifier input.

Rendering avoids any plotting backend so that identical inputs always give
byte-identical PNGs.
"""

from __future__ import annotations

import base64
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

RENDER_SIZE = 224

__all__ = [
    "RENDER_SIZE",
    "FeatureImage",
    "CombinedImage",
    "render",
    "combine",
    "save_png",
    "load_png",
]

# 256-entry viridis lookup table (uint8 RGB triples, zlib+base64 packed)
_VIRIDIS_PACKED = (
    "eNoBAAP//EQBVEQCVkUEV0UFWUYHWkYIXEYKXUYLXkcNYEcOYUcQY0cRZEcTZUgUZ0gWaEgXaUgYakgabEgbbUgcbkgdb0gfcEggcUghc0gjdEgkdUgldkgmd0goeEgpeUcqekcsekcte0cufEcvfUYwfkYyfkYzf0Y0gEU1gUU3gUU4gkQ5g0Q6g0Q7hEM9hEM+hUI/hUJAhkJBhkFCh0FEh0BFiEBGiD9HiD9IiT5JiT5KiT5Mij1Nij1OijxPijxQiztRiztSizpTizpUjDlVjDlWjDhYjDhZjDdajDdbjTZcjTZdjTVejTVfjTRgjTRhjTNijTNjjTJkjjJljjFmjjFnjjFojjBpjjBqji9rji9sji5tji5uji5vji1wji1xjixxjixyjixzjit0jit1jip2jip3jip4jil5jil6jil7jih8jih9jid+jid/jieAjiaBjiaCjiaCjiWDjiWEjiWFjiSGjiSHjiOIjiOJjiOKjSKLjSKMjSKNjSGOjSGPjSGQjSGRjCCSjCCSjCCTjB+UjB+Vix+Wix+Xix+Yix+Zih+aih6bih6ciR6diR+eiR+fiB+giB+hiB+hhx+ihyCjhiCkhiGlhSGmhSKnhSKohCOpgySqgyWrgiWsgiatgSetgSiugCmvfyqwfyyxfi2yfS6zfC+0fDG1ezK2ejS2eTW3eTe4eDi5dzq6dju7dT28dD+8c0C9ckK+cUS/cEbAb0jBbkrBbUzCbE7Da1DEalLFaVTFaFbGZ1jHZVrIZFzIY17JYmDKYGPLX2XLXmfMXGnNW2zNWm7OWHDPV3PQVnXQVHfRU3rRUXzSUH/TToHTTYTUS4bVSYnVSIvWRo7WRZDXQ5PXQZXYQJjYPpvZPJ3ZO6DaOaLaN6XbNqjbNKrcMq3cMLDdL7LdLbXeK7jeKbreKL3fJsDfJcLfI8XgIcjgIMrhH83hHdDhHNLiG9XiGtjiGdrjGd3jGN/jGOLkGOXkGefkGerlGuzlG+/lHPHlHfTmHvbmIPjmIfvnI/3nJRfoSno="
)
VIRIDIS = np.frombuffer(
    zlib.decompress(base64.b64decode(_VIRIDIS_PACKED)), dtype=np.uint8
).reshape(256, 3)

COLORMAPS = ("grayscale", "viridis")


@dataclass(frozen=True)
class FeatureImage:
    pixels: np.ndarray  # (224, 224, 3) uint8
    kind: str
    clip_id: str

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.shape != (RENDER_SIZE, RENDER_SIZE, 3):
            raise ValueError(f"feature image must be {RENDER_SIZE}x{RENDER_SIZE} RGB")
        object.__setattr__(self, "pixels", p)


@dataclass(frozen=True)
class CombinedImage:
    pixels: np.ndarray  # (224, 224*m, 3) uint8
    order: tuple
    clip_id: str

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        m = len(self.order)
        if m < 1 or p.shape != (RENDER_SIZE, RENDER_SIZE * m, 3):
            raise ValueError("combined image width must be 224 * len(order)")
        object.__setattr__(self, "pixels", p)
        object.__setattr__(self, "order", tuple(self.order))

    def slab(self, i: int) -> np.ndarray:
        """Pixels of constituent i."""
        return self.pixels[:, RENDER_SIZE * i : RENDER_SIZE * (i + 1)]


def render(m, colormap: str = "grayscale") -> FeatureImage:
    """Render a FeatureMatrix onto the fixed canvas.

    Values are min-max normalized to [0, 1] per image (a constant matrix maps
    to 0.5 everywhere), resized nearest-neighbor with coefficient index 0 at
    the bottom row, then mapped through the colormap.
    """
    if colormap not in COLORMAPS:
        raise ValueError(f"unknown colormap {colormap!r}")
    v = np.asarray(m.values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot render an empty feature matrix")
    lo, hi = v.min(), v.max()
    if hi > lo:
        norm = (v - lo) / (hi - lo)
    else:
        norm = np.full_like(v, 0.5)

    n_rows, n_cols = norm.shape
    rows = (n_rows - 1) - (np.arange(RENDER_SIZE) * n_rows) // RENDER_SIZE
    cols = (np.arange(RENDER_SIZE) * n_cols) // RENDER_SIZE
    grid = norm[np.ix_(rows, cols)]

    levels = np.rint(grid * 255.0).astype(np.uint8)
    if colormap == "grayscale":
        pixels = np.repeat(levels[:, :, None], 3, axis=2)
    else:
        pixels = VIRIDIS[levels]
    return FeatureImage(pixels=pixels, kind=m.kind, clip_id=m.clip_id)


def combine(images) -> CombinedImage:
    """Concatenate per-feature images horizontally in list order."""
    images = list(images)
    if not images:
        raise ValueError("combine needs at least one image")
    for img in images:
        if img.pixels.shape != (RENDER_SIZE, RENDER_SIZE, 3):
            raise ValueError("all constituent images must be 224x224 RGB")
    clip_ids = {img.clip_id for img in images}
    if len(clip_ids) != 1:
        raise ValueError(f"mismatched clip ids: {sorted(clip_ids)}")
    pixels = np.hstack([img.pixels for img in images])
    return CombinedImage(
        pixels=pixels,
        order=tuple(img.kind for img in images),
        clip_id=images[0].clip_id,
    )


def save_png(img, path) -> Path:
    """Write an 8-bit RGB PNG; existing files are replaced.

    If path is a directory the file is named <clip_id>.png inside it, so
    image stems always track the source audio stems.
    """
    path = Path(path)
    if path.is_dir():
        path = path / f"{img.clip_id}.png"
    try:
        Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc
    return path


def load_png(path) -> np.ndarray:
    """Read a PNG back as an (h, w, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
