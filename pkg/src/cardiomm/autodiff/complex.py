"""Differentiable complex arithmetic on real tensors with a packed re/im axis.

Complex images live in real tensors of shape ``(..., 2, H, W)`` where axis -3
holds (real, imaginary). Gradients follow the usual convention for real
losses of complex variables: the gradient slot of a complex value stores
``dL/dRe + i dL/dIm``.
"""

from __future__ import annotations

import numpy as np

from ..physics import fft2c as _fft2c, ifft2c as _ifft2c
from .tensor import ShapeError, Tensor, _unbroadcast, as_tensor, make_result


def to_complex(a: np.ndarray) -> np.ndarray:
    if a.shape[-3] != 2:
        raise ShapeError(f"packed complex axis (-3) must have size 2, got {a.shape}")
    return a[..., 0, :, :] + 1j * a[..., 1, :, :]


def from_complex(z: np.ndarray, dtype=np.float64) -> np.ndarray:
    return np.stack([z.real, z.imag], axis=-3).astype(dtype, copy=False)


def pack(z: np.ndarray, dtype=None) -> Tensor:
    """Constant packed tensor from a complex numpy array."""
    from .tensor import get_default_dtype
    return Tensor(from_complex(np.asarray(z), dtype or get_default_dtype()))


def cmul(a: Tensor, b: Tensor, conj_b: bool = False) -> Tensor:
    """Complex product ``a * b`` (or ``a * conj(b)``) with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    za, zb = to_complex(a.data), to_complex(b.data)
    zbb = np.conj(zb) if conj_b else zb
    out = from_complex(za * zbb, np.result_type(a.dtype, b.dtype))

    def backward(g):
        zg = to_complex(g)
        ga = gb = None
        if a.requires_grad:
            ga = from_complex(_unbroadcast(zg * np.conj(zbb), za.shape), a.dtype)
        if b.requires_grad:
            gzb = np.conj(zg) * za if conj_b else zg * np.conj(za)
            gb = from_complex(_unbroadcast(gzb, zb.shape), b.dtype)
        return ga, gb

    return make_result(out, (a, b), backward)


def fft2c(x: Tensor) -> Tensor:
    """Centred orthonormal 2-D FFT of a packed tensor."""
    x = as_tensor(x)
    out = from_complex(_fft2c(to_complex(x.data)), x.dtype)
    return make_result(out, (x,), lambda g: (from_complex(_ifft2c(to_complex(g)), x.dtype),))


def ifft2c(x: Tensor) -> Tensor:
    """Centred orthonormal 2-D inverse FFT of a packed tensor."""
    x = as_tensor(x)
    out = from_complex(_ifft2c(to_complex(x.data)), x.dtype)
    return make_result(out, (x,), lambda g: (from_complex(_fft2c(to_complex(g)), x.dtype),))


def abs2(x: Tensor) -> Tensor:
    """Squared magnitude ``re**2 + im**2``; drops the packed axis."""
    x = as_tensor(x)
    out = x.data[..., 0, :, :] ** 2 + x.data[..., 1, :, :] ** 2

    def backward(g):
        return (2.0 * x.data * np.expand_dims(g, -3),)

    return make_result(out, (x,), backward)


def root_sum_of_squares(x: Tensor, coil_axis: int = 0, eps: float = 0.0) -> Tensor:
    """Pixelwise ``sqrt(sum_j |x_j|^2 + eps)`` over the coil axis of a packed tensor."""
    x = as_tensor(x)
    p = abs2(x).sum(axis=coil_axis)
    out = np.sqrt(p.data + eps)
    safe = np.where(out > 0, out, 1.0)

    def backward(g):
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return make_result(out, (p,), backward)
