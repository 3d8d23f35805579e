"""Image quality metrics on magnitude images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (t / sigma) ** 2)
    return g / g.sum()


def filter_matrix(n: int, size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Banded ``(n - size + 1, n)`` matrix applying the 1-D window over the valid region."""
    if size > n:
        raise ValueError(f"SSIM window {size} larger than image dimension {n}")
    g = gaussian_window(size, sigma)
    m = np.zeros((n - size + 1, n))
    for i in range(n - size + 1):
        m[i, i:i + size] = g
    return m


def psnr(ref: np.ndarray, test: np.ndarray, data_range: float | None = None) -> float:
    """``20 log10(max(ref) / rmse)``; identical images give ``inf``."""
    ref, test = np.asarray(ref, dtype=float), np.asarray(test, dtype=float)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    rmse = np.sqrt(np.mean((ref - test) ** 2))
    if rmse == 0:
        return float("inf")
    peak = ref.max() if data_range is None else data_range
    return float(20 * np.log10(peak / rmse))


def ssim_map(ref: np.ndarray, test: np.ndarray, data_range: float | None = None) -> np.ndarray:
    """Local SSIM over the valid region with an 11x11 Gaussian window (sigma 1.5)."""
    ref, test = np.asarray(ref, dtype=float), np.asarray(test, dtype=float)
    if ref.shape != test.shape or ref.ndim != 2:
        raise ValueError(f"ssim needs two equal 2-D images, got {ref.shape} and {test.shape}")
    L = ref.max() if data_range is None else data_range
    c1, c2 = (SSIM_K1 * L) ** 2, (SSIM_K2 * L) ** 2
    gy, gx = filter_matrix(ref.shape[0]), filter_matrix(ref.shape[1])

    def filt(a):
        return gy @ a @ gx.T

    mx, my = filt(ref), filt(test)
    sxx = filt(ref * ref) - mx * mx
    syy = filt(test * test) - my * my
    sxy = filt(ref * test) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def ssim(ref: np.ndarray, test: np.ndarray, data_range: float | None = None) -> float:
    return float(ssim_map(ref, test, data_range).mean())


@dataclass
class Summary:
    mean: float
    ci_low: float
    ci_high: float
    n: int


def summarize(values) -> Summary:
    """Mean with a normal 95% interval ``mean +/- 1.96 sem`` (n-1 denominator)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("no values to summarise")
    m = float(v.mean())
    sem = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return Summary(m, m - 1.96 * sem, m + 1.96 * sem, int(v.size))


def normalized_pair(ref: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale both magnitudes by the reference maximum."""
    ref = np.abs(np.asarray(ref, dtype=float))
    peak = ref.max()
    if peak <= 0:
        raise ValueError("reference is all zero")
    return ref / peak, np.abs(np.asarray(test, dtype=float)) / peak


def image_metrics(ref: np.ndarray, test: np.ndarray) -> dict:
    r, t = normalized_pair(ref, test)
    return {"psnr": psnr(r, t), "ssim": ssim(r, t)}
