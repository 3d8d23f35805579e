"""Multi-coil Cartesian MRI signal model.

Arrays follow the ``(coils, ky, kx)`` convention. Fourier transforms are
centred and orthonormal, so Parseval holds exactly and the adjoint of
:func:`fft2c` is :func:`ifft2c`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft


class PhysicsShapeError(ValueError):
    pass


@dataclass
class KSpaceVolume:
    """Complex multi-coil k-space with acquisition geometry."""

    data: np.ndarray
    pixel_spacing: tuple[float, float] = (1.0, 1.0)
    slice_thickness: float = 8.0
    frame: int | None = None
    scan_id: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] < 1:
            raise PhysicsShapeError(f"k-space must be (coils, ky, kx), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("k-space contains non-finite entries")

    @property
    def n_coils(self) -> int:
        return self.data.shape[0]


@dataclass
class CoilSensitivities:
    """Per-coil complex maps normalised so that sum_j |S_j|^2 = 1 on support."""

    maps: np.ndarray
    support: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.maps = np.asarray(self.maps)
        if self.maps.ndim != 3:
            raise PhysicsShapeError(f"sensitivities must be (coils, y, x), got {self.maps.shape}")

    def normalization_error(self) -> float:
        p = np.sum(np.abs(self.maps) ** 2, axis=0)
        nz = p > 0
        return float(np.max(np.abs(p[nz] - 1.0))) if nz.any() else 0.0


def fft2c(img: np.ndarray) -> np.ndarray:
    """Centred orthonormal FFT over the last two axes."""
    axes = (-2, -1)
    return scipy.fft.fftshift(
        scipy.fft.fft2(scipy.fft.ifftshift(img, axes=axes), axes=axes, norm="ortho"),
        axes=axes)


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Centred orthonormal inverse FFT over the last two axes."""
    axes = (-2, -1)
    return scipy.fft.fftshift(
        scipy.fft.ifft2(scipy.fft.ifftshift(ksp, axes=axes), axes=axes, norm="ortho"),
        axes=axes)


def _check_coil_shapes(x: np.ndarray, maps: np.ndarray) -> None:
    if x.shape[-2:] != maps.shape[-2:]:
        raise PhysicsShapeError(f"spatial shape mismatch: image {x.shape[-2:]} vs maps {maps.shape[-2:]}")
    if x.ndim == 3 and x.shape[0] != maps.shape[0]:
        raise PhysicsShapeError(f"coil count mismatch: image {x.shape[0]} vs maps {maps.shape[0]}")


def coil_combine(x_multi: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Conjugate-weighted coil sum ``sum_j conj(S_j) x_j``."""
    x_multi, maps = np.asarray(x_multi), np.asarray(maps)
    _check_coil_shapes(x_multi, maps)
    if x_multi.ndim != 3:
        raise PhysicsShapeError(f"multi-coil image must be (coils, y, x), got {x_multi.shape}")
    return np.sum(np.conj(maps) * x_multi, axis=0)


def coil_expand(x: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Per-coil weighting ``S_j x``."""
    x, maps = np.asarray(x), np.asarray(maps)
    if x.ndim != 2:
        raise PhysicsShapeError(f"coil-combined image must be 2-D, got {x.shape}")
    _check_coil_shapes(x, maps)
    return maps * x[None]


def sos(x_multi: np.ndarray, axis: int = 0) -> np.ndarray:
    """Root sum of squares over the coil axis."""
    return np.sqrt(np.sum(np.abs(x_multi) ** 2, axis=axis))


def forward_model(x: np.ndarray, maps: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Encoding operator ``A x = U F S x``."""
    mask = np.asarray(mask)
    if mask.shape != np.shape(x)[-2:]:
        raise PhysicsShapeError(f"mask shape {mask.shape} does not match image {np.shape(x)[-2:]}")
    return fft2c(coil_expand(x, maps)) * mask


def adjoint_model(y: np.ndarray, maps: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Adjoint ``A^H y = S^H F^H U^H y``."""
    mask = np.asarray(mask)
    if mask.shape != np.shape(y)[-2:]:
        raise PhysicsShapeError(f"mask shape {mask.shape} does not match k-space {np.shape(y)[-2:]}")
    return coil_combine(ifft2c(y * mask), maps)


def normalize_sensitivities(maps: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Scale maps so that ``sum_j |S_j|^2 = 1`` where the RSS exceeds ``threshold``.

    Pixels at or below the threshold are set to zero.
    """
    rss = sos(maps)
    keep = rss > threshold
    out = np.zeros_like(maps)
    out[:, keep] = maps[:, keep] / rss[keep]
    return out


class CompressionResult(NamedTuple):
    kspace: np.ndarray
    matrix: np.ndarray
    energy_retained: float
    singular_values: np.ndarray


def coil_compress(kspace: np.ndarray, keep: int, calib: tuple[slice, slice] | None = None
                  ) -> CompressionResult:
    """SVD coil compression to ``keep`` virtual coils.

    Parameters
    ----------
    kspace : ndarray, shape (C, ky, kx)
    keep : int
        Number of virtual coils retained.
    calib : tuple of slices, optional
        Region (normally the ACS block) used to estimate the compression
        matrix. Defaults to the whole k-space.

    Returns
    -------
    CompressionResult
        ``energy_retained`` is the fraction of calibration energy captured by
        the leading ``keep`` singular vectors.
    """
    kspace = np.asarray(kspace)
    n_coils = kspace.shape[0]
    if keep <= 0:
        raise ValueError(f"keep must be positive, got {keep}")
    if keep > n_coils:
        raise ValueError(f"keep={keep} exceeds the number of coils {n_coils}")
    region = kspace if calib is None else kspace[(slice(None),) + tuple(calib)]
    mat = region.reshape(n_coils, -1)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    proj = np.conj(u[:, :keep]).T
    compressed = np.tensordot(proj, kspace, axes=(1, 0))
    energy = float(np.sum(s[:keep] ** 2) / np.sum(s ** 2)) if np.any(s) else 1.0
    return CompressionResult(compressed, proj, energy, s)
