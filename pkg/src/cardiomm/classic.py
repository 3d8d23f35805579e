"""Non-learned reconstruction: ACS sensitivity estimation and CG-SENSE."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .physics import adjoint_model, forward_model, ifft2c, sos

log = logging.getLogger(__name__)


class CgDivergenceError(RuntimeError):
    """Raised when the CG residual grows by 10x over its running minimum."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class CgConfig:
    max_iters: int = 30
    tol: float = 1e-6
    lambda_reg: float = 0.01

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.lambda_reg < 0:
            raise ValueError(f"lambda_reg must be >= 0, got {self.lambda_reg}")


def raised_cosine(n: int) -> np.ndarray:
    """Symmetric raised-cosine window of length ``n`` that stays positive."""
    if n <= 1:
        return np.ones(max(n, 0))
    return 0.5 * (1.0 - np.cos(2 * np.pi * (np.arange(n) + 0.5) / n))


def acs_lowres_images(y: np.ndarray, acs: tuple[slice, slice]) -> np.ndarray:
    """Apodised, zero-padded ACS data transformed to the image domain per coil."""
    rows, cols = acs
    block = y[:, rows, cols]
    if block.size == 0 or block.shape[1] == 0 or block.shape[2] == 0:
        raise ValueError("ACS region is empty")
    window = np.outer(raised_cosine(block.shape[1]), raised_cosine(block.shape[2]))
    padded = np.zeros_like(y)
    padded[:, rows, cols] = block * window
    return ifft2c(padded)


def estimate_sens_acs(y: np.ndarray, acs: tuple[slice, slice], threshold: float = 1e-3
                      ) -> np.ndarray:
    """Low-resolution sensitivity estimate from the ACS region.

    Parameters
    ----------
    y : ndarray, shape (C, ky, kx)
        Multi-coil k-space whose ACS region is fully sampled.
    acs : tuple of slices
        ACS rows and columns.
    threshold : float
        Support threshold relative to the maximum RSS; maps are zero below it.

    Returns
    -------
    ndarray, shape (C, y, x)
        Maps with ``sum_j |S_j|^2 = 1`` on the support.
    """
    low = acs_lowres_images(np.asarray(y), acs)
    rss = sos(low)
    support = rss > threshold * rss.max()
    maps = np.zeros_like(low)
    maps[:, support] = low[:, support] / rss[support]
    return maps


def zero_filled(y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-coil inverse FFT of the masked k-space."""
    return ifft2c(np.asarray(y) * np.asarray(mask))


def sense_cg(y: np.ndarray, mask: np.ndarray, maps: np.ndarray, cfg: CgConfig = CgConfig(),
             trace: list | None = None) -> np.ndarray:
    """Solve ``min ||y - U F S x||^2 + lambda ||x||^2`` with conjugate gradients.

    If ``trace`` is given it receives one ``(normal_residual, data_residual)``
    pair per iteration, starting from the initial guess ``x = 0``.
    """
    y = np.asarray(y) * mask
    lam = cfg.lambda_reg

    def normal(v):
        return adjoint_model(forward_model(v, maps, mask), maps, mask) + lam * v

    b = adjoint_model(y, maps, mask)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = np.vdot(r, r).real
    b_norm = np.sqrt(np.vdot(b, b).real)
    history: list[float] = []
    if trace is not None:
        trace.append((np.sqrt(rs), float(np.linalg.norm(y))))
    if b_norm == 0:
        return x
    best = np.sqrt(rs)
    for it in range(cfg.max_iters):
        ap = normal(p)
        alpha = rs / np.vdot(p, ap).real
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = np.vdot(r, r).real
        res = np.sqrt(rs_new)
        history.append(float(res))
        if trace is not None:
            trace.append((float(res), float(np.linalg.norm(forward_model(x, maps, mask) - y))))
        if res > 10 * best:
            raise CgDivergenceError(f"CG residual grew to {res:.3e} (min {best:.3e}) at "
                                    f"iteration {it + 1}", history)
        best = min(best, res)
        if res <= cfg.tol * b_norm:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    log.debug("sense_cg stopped after %d iterations, residual %.3e", len(history), history[-1])
    return x
