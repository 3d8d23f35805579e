"""Retrospective Cartesian undersampling masks (uniform, random, radial).

The acceleration factor counts only the samples chosen by the pattern
itself; the autocalibration (ACS) fill-in added on top of the pattern is
excluded. Every mask keeps the bare pattern grid next to the final grid
so that this accounting is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

PATTERNS = ("uniform", "random", "radial")
GOLDEN_ANGLE_DEG = 111.246


class MaskError(ValueError):
    pass


@dataclass
class UndersamplingMask:
    """Binary acquisition mask with provenance.

    Attributes
    ----------
    grid : ndarray of uint8, shape (ky, kx)
        Final sampling mask (pattern union ACS).
    pattern_grid : ndarray of uint8
        Samples selected by the pattern alone.
    pattern : str
    nominal_af : float
    acs : tuple
        ``("lines", n)`` or ``("block", (h, w))``.
    seed : int
    """

    grid: np.ndarray
    pattern_grid: np.ndarray
    pattern: str
    nominal_af: float
    acs: tuple
    seed: int = 0
    effective: float = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.uint8)
        self.pattern_grid = np.asarray(self.pattern_grid, dtype=np.uint8)
        if self.grid.shape != self.pattern_grid.shape:
            raise MaskError("grid and pattern grid shapes differ")
        self.effective = effective_af(self) if self.pattern_grid.any() else float("inf")

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def acs_region(self) -> tuple[slice, slice]:
        return acs_slices(self.shape, self.acs)

    @property
    def text(self) -> str:
        return undersampling_text(self.pattern, self.nominal_af)

    # ------------------------------------------------------------ persistence
    def to_dict(self) -> dict:
        kind, size = self.acs
        return {
            "pattern": self.pattern,
            "nominal_af": float(self.nominal_af),
            "acs": [kind, list(size) if isinstance(size, (tuple, list)) else int(size)],
            "seed": int(self.seed),
            "shape": list(self.shape),
            "grid_rle": rle_encode(self.grid),
            "pattern_rle": rle_encode(self.pattern_grid),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UndersamplingMask":
        shape = tuple(d["shape"])
        kind, size = d["acs"]
        acs = (kind, tuple(size) if kind == "block" else int(size))
        return cls(rle_decode(d["grid_rle"], shape), rle_decode(d["pattern_rle"], shape),
                   d["pattern"], float(d["nominal_af"]), acs, int(d["seed"]))


def undersampling_text(pattern: str, af: float) -> str:
    """Canonical description such as ``"undersampling uniform; acceleration 8x"``."""
    if pattern not in PATTERNS:
        raise MaskError(f"unknown pattern {pattern!r}")
    return f"undersampling {pattern}; acceleration {float(af):g}x"


def rle_encode(grid: np.ndarray) -> list[list[int]]:
    """Per-row run lengths, alternating zeros and ones, starting with zeros."""
    rows = []
    for row in np.asarray(grid, dtype=np.uint8):
        change = np.flatnonzero(np.diff(np.concatenate([[0], row, [1 - row[-1]]])))
        runs = np.diff(np.concatenate([[0], change]))
        rows.append([int(r) for r in runs])
    return rows


def rle_decode(rows: list[list[int]], shape: tuple[int, int]) -> np.ndarray:
    out = np.zeros(shape, dtype=np.uint8)
    for i, runs in enumerate(rows):
        pos, val = 0, 0
        for r in runs:
            out[i, pos:pos + r] = val
            pos += r
            val = 1 - val
    return out


def acs_slices(shape: tuple[int, int], acs: tuple) -> tuple[slice, slice]:
    ny, nx = shape
    kind, size = acs
    if kind == "lines":
        n = int(size)
        if n > ny:
            raise MaskError(f"acs_lines={n} exceeds ny={ny}")
        top = ny // 2 - n // 2
        return slice(top, top + n), slice(0, nx if n else 0)
    if kind == "block":
        h, w = size
        if h > ny or w > nx:
            raise MaskError(f"ACS block {h}x{w} exceeds grid {ny}x{nx}")
        top, left = ny // 2 - h // 2, nx // 2 - w // 2
        return slice(top, top + h), slice(left, left + w)
    raise MaskError(f"unknown ACS kind {kind!r}")


def _with_acs(pattern_grid: np.ndarray, acs: tuple) -> np.ndarray:
    grid = pattern_grid.copy()
    grid[acs_slices(grid.shape, acs)] = 1
    return grid


def effective_af(mask: UndersamplingMask) -> float:
    """Fully sampled point count over pattern-acquired point count.

    ACS fill-in beyond the pattern is excluded from the denominator.
    """
    n = int(mask.pattern_grid.sum())
    if n == 0:
        raise MaskError("mask has no acquired points outside the ACS fill-in")
    return float(Fraction(mask.grid.size, n))


def gen_uniform(ny: int, nx: int, af: float, acs_lines: int = 20, offset: int = 0
                ) -> UndersamplingMask:
    """Every ``round(af)``-th phase-encode line plus ``acs_lines`` central lines."""
    if af < 1:
        raise MaskError(f"af must be >= 1, got {af}")
    step = int(round(af))
    pattern = np.zeros((ny, nx), dtype=np.uint8)
    pattern[offset % step::step, :] = 1
    if not pattern.any():
        raise MaskError(f"af={af} leaves no sampled lines for ny={ny}")
    acs = ("lines", int(acs_lines))
    return UndersamplingMask(_with_acs(pattern, acs), pattern, "uniform", float(af), acs, 0)


def line_density(ny: int, sigma: float | None = None) -> np.ndarray:
    """Centre-weighted Gaussian line density (unnormalised)."""
    sigma = ny / 6 if sigma is None else sigma
    ky = np.arange(ny) - ny // 2
    return np.exp(-0.5 * (ky / sigma) ** 2)


def gen_random(ny: int, nx: int, af: float, acs_lines: int = 20, seed: int = 0
               ) -> UndersamplingMask:
    """Variable-density random phase-encode lines outside the ACS band."""
    if af < 1:
        raise MaskError(f"af must be >= 1, got {af}")
    target = int(round(ny / af))
    if target < 1:
        raise MaskError(f"af={af} gives fewer than one line for ny={ny}")
    acs = ("lines", int(acs_lines))
    rows = acs_slices((ny, nx), acs)[0]
    outside = np.setdiff1d(np.arange(ny), np.arange(ny)[rows])
    if target > outside.size:
        raise MaskError(f"{target} lines requested but only {outside.size} lie outside the ACS")
    w = line_density(ny)[outside]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(outside, size=target, replace=False, p=w / w.sum())
    pattern = np.zeros((ny, nx), dtype=np.uint8)
    pattern[chosen, :] = 1
    return UndersamplingMask(_with_acs(pattern, acs), pattern, "random", float(af), acs, int(seed))


def _spoke_pixels(ny: int, nx: int, index: int, increment_deg: float = GOLDEN_ANGLE_DEG
                  ) -> tuple[np.ndarray, np.ndarray]:
    radius = max(ny, nx) / 2
    t = np.arange(-radius, radius + 0.25, 0.25)
    theta = np.deg2rad(index * increment_deg)
    yy = np.rint(ny // 2 + t * np.sin(theta)).astype(int)
    xx = np.rint(nx // 2 + t * np.cos(theta)).astype(int)
    ok = (yy >= 0) & (yy < ny) & (xx >= 0) & (xx < nx)
    return yy[ok], xx[ok]


def rasterize_spokes(ny: int, nx: int, n_spokes: int, increment_deg: float = GOLDEN_ANGLE_DEG
                     ) -> np.ndarray:
    """Nearest-neighbour rasterisation of diametric spokes through k-space centre."""
    grid = np.zeros((ny, nx), dtype=np.uint8)
    for s in range(n_spokes):
        grid[_spoke_pixels(ny, nx, s, increment_deg)] = 1
    return grid


def gen_radial(ny: int, nx: int, af: float, acs_block: tuple[int, int] = (20, 20),
               n_spokes: int | None = None) -> UndersamplingMask:
    """Golden-angle radial spokes rasterised on the Cartesian grid plus a central block.

    By default ``n_spokes = round((ny*nx/af - acs_area) / max(ny, nx))``.
    """
    if af < 1:
        raise MaskError(f"af must be >= 1, got {af}")
    acs = ("block", (int(acs_block[0]), int(acs_block[1])))
    if n_spokes is None:
        acs_area = acs[1][0] * acs[1][1]
        n_spokes = int(round((ny * nx / af - acs_area) / max(ny, nx)))
    if n_spokes < 1:
        raise MaskError(f"af={af} leaves no radial spokes on a {ny}x{nx} grid")
    pattern = rasterize_spokes(ny, nx, n_spokes)
    return UndersamplingMask(_with_acs(pattern, acs), pattern, "radial", float(af), acs, 0)


def generate(pattern: str, ny: int, nx: int, af: float, seed: int = 0,
             acs_lines: int = 20, acs_block: tuple[int, int] = (20, 20)) -> UndersamplingMask:
    """Dispatch on pattern name with the default ACS conventions."""
    if pattern == "uniform":
        return gen_uniform(ny, nx, af, acs_lines, offset=seed % max(int(round(af)), 1))
    if pattern == "random":
        return gen_random(ny, nx, af, acs_lines, seed)
    if pattern == "radial":
        return gen_radial(ny, nx, af, acs_block)
    raise MaskError(f"unknown pattern {pattern!r}")


def apply_mask(kspace: np.ndarray, mask) -> np.ndarray:
    """Zero non-acquired samples; the mask broadcasts over coils."""
    grid = mask.grid if isinstance(mask, UndersamplingMask) else np.asarray(mask)
    if np.shape(kspace)[-2:] != grid.shape:
        raise MaskError(f"mask shape {grid.shape} does not match k-space {np.shape(kspace)[-2:]}")
    return kspace * grid
