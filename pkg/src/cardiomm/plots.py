"""Raster outputs: grayscale images, error maps and AHA bullseye charts."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    finite = img[np.isfinite(img)]
    lo = (finite.min() if finite.size else 0.0) if vmin is None else vmin
    hi = (finite.max() if finite.size else 1.0) if vmax is None else vmax
    scaled = (np.nan_to_num(img, nan=lo) - lo) / (hi - lo if hi > lo else 1.0)
    return (np.clip(scaled, 0, 1) * 255).round().astype(np.uint8)


def save_png(path: str | os.PathLike, img: np.ndarray, **kwargs) -> None:
    Image.fromarray(to_uint8(img, **kwargs)).save(path, format="PNG")


def error_map(ref: np.ndarray, test: np.ndarray) -> np.ndarray:
    """Absolute error scaled by the reference maximum."""
    ref = np.abs(ref)
    return np.abs(np.abs(test) - ref) / max(float(ref.max()), 1e-30)


def bullseye(values: np.ndarray, size: int = 256) -> np.ndarray:
    """Rasterised 16-segment polar chart (basal outer ring, apical inner ring).

    Segment 1 starts at 12 o'clock and segments advance clockwise; unmeasured
    segments (nan) are drawn as zero.
    """
    vals = np.nan_to_num(np.asarray(values, dtype=float)[:16])
    yy, xx = np.mgrid[:size, :size]
    c = (size - 1) / 2
    r = np.hypot(yy - c, xx - c) / c
    ang = np.mod(np.arctan2(xx - c, -(yy - c)), 2 * np.pi)
    out = np.zeros((size, size))
    rings = [(2 / 3, 1.0, 6, 0), (1 / 3, 2 / 3, 6, 6), (0.0, 1 / 3, 4, 12)]
    for r0, r1, n, off in rings:
        ring = (r >= r0) & (r < r1)
        seg = np.minimum((ang / (2 * np.pi / n)).astype(int), n - 1)
        for s in range(n):
            out[ring & (seg == s)] = vals[off + s]
    return out
