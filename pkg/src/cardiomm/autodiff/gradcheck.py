"""Central finite-difference gradient verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    """Per-parameter maximum error normalised by the numerical gradient scale."""

    errors: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.errors.values())

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def __str__(self) -> str:
        lines = [f"{'PASS' if e <= self.tol else 'FAIL'} {name}: {e:.3e}"
                 for name, e in self.errors.items()]
        return "\n".join(lines)


def grad_check(fn: Callable[[], Tensor], params: Mapping[str, Tensor] | Sequence[Tensor],
               eps: float = 1e-5, tol: float = 1e-4, max_elements: int = 64,
               seed: int = 0, atol: float = 1e-8) -> GradCheckReport:
    """Compare reverse-mode gradients of ``fn()`` with central differences.

    For each parameter the error is ``max|g_ad - g_fd| / max(max|g_fd|, atol)``.
    Parameters larger than ``max_elements`` are checked on a fixed random
    subset of entries.
    """
    if not isinstance(params, Mapping):
        params = {p.name or f"param{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.requires_grad = True
        p.grad = None
    loss = fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tol=tol)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if flat.size > max_elements:
            idx = np.sort(rng.choice(flat.size, max_elements, replace=False))
        else:
            idx = np.arange(flat.size)
        numeric = np.empty(idx.size)
        for n, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            numeric[n] = (up - down) / (2 * eps)
        ad = analytic[name].reshape(-1)[idx]
        scale = max(float(np.max(np.abs(numeric))), atol)
        report.errors[name] = float(np.max(np.abs(ad - numeric)) / scale)
    for p in params.values():
        p.grad = None
    return report
