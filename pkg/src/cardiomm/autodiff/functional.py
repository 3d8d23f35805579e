"""Differentiable network primitives (NCHW layout)."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result


def _out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """``(N, C, Hp, Wp) -> (N, C*K*K, Ho*Wo)`` patch matrix."""
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, ho, wo), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * k * k, ho * wo)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
           pad: int = 0) -> Tensor:
    """2-D cross-correlation.

    Parameters
    ----------
    x : Tensor
        Input of shape ``(N, C, H, W)``.
    w : Tensor
        Kernel of shape ``(O, C, K, K)``.
    b : Tensor, optional
        Bias of shape ``(O,)``.
    stride, pad : int
        Stride and symmetric zero padding.

    Returns
    -------
    Tensor
        Output of shape ``(N, O, Ho, Wo)`` with
        ``Ho = (H + 2*pad - K) // stride + 1``.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be NCHW, got ndim={x.ndim}")
    n, c, h, wd = x.shape
    o, ci, k, k2 = w.shape
    if ci != c:
        raise ShapeError(f"conv2d channel dimension mismatch: input C={c}, kernel C={ci}")
    if k != k2:
        raise ShapeError(f"conv2d kernel must be square, got {k}x{k2}")
    if h + 2 * pad < k:
        raise ShapeError(f"conv2d height dimension {h}+2*{pad} smaller than kernel {k}")
    if wd + 2 * pad < k:
        raise ShapeError(f"conv2d width dimension {wd}+2*{pad} smaller than kernel {k}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (o,):
            raise ShapeError(f"conv2d bias dimension mismatch: {b.shape} vs ({o},)")
    ho, wo = _out_size(h, k, stride, pad), _out_size(wd, k, stride, pad)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    wmat = w.data.reshape(o, c * k * k)
    if k == 1 and stride == 1:
        cols = xp.reshape(n, c, h * wd)
    else:
        cols = _im2col(xp, k, stride, ho, wo)
    out = np.matmul(wmat, cols).reshape(n, o, ho, wo)
    if b is not None:
        out += b.data.reshape(1, o, 1, 1)

    def backward(g):
        g2 = g.reshape(n, o, ho * wo)
        gx = gw = gb = None
        if w.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        if b is not None and b.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, g2)
            if k == 1 and stride == 1:
                gxp = gcols.reshape(n, c, h, wd)
            else:
                gcols = gcols.reshape(n, c, k, k, ho, wo)
                gxp = np.zeros(xp.shape, dtype=g.dtype)
                for i in range(k):
                    for j in range(k):
                        gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += gcols[:, :, i, j]
            gx = gxp[:, :, pad:pad + h, pad:pad + wd] if pad else gxp
        return (gx, gw) if b is None else (gx, gw, gb)

    parents = (x, w) if b is None else (x, w, b)
    return make_result(out, parents, backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map ``x @ w.T + b`` for ``x`` of shape ``(N, Din)``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear input dimension mismatch: x has Din={x.shape[-1]}, "
                         f"weight expects Din={w.shape[1]}")
    out = x.data @ w.data.T
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"linear bias dimension mismatch: {b.shape} vs ({w.shape[0]},)")
        out = out + b.data

    def backward(g):
        gx = g @ w.data if x.requires_grad else None
        gw = (g.reshape(-1, g.shape[-1]).T @ x.data.reshape(-1, x.shape[-1])
              if w.requires_grad else None)
        if b is None:
            return gx, gw
        return gx, gw, g.reshape(-1, g.shape[-1]).sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return make_result(out, parents, backward)


# ----------------------------------------------------------------- activations
def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    return make_result(x.data * pos, (x,), lambda g: (g * pos,))


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with a single learnable negative slope."""
    x, slope = as_tensor(x), as_tensor(slope)
    pos = x.data > 0
    a = slope.data.reshape(())
    out = np.where(pos, x.data, a * x.data)

    def backward(g):
        gx = np.where(pos, g, a * g)
        ga = np.sum(np.where(pos, 0.0, g * x.data)).reshape(slope.shape)
        return gx, ga.astype(slope.dtype)

    return make_result(out, (x, slope), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_result(out, (x,), backward)


def activation(x: Tensor, kind: str, slope: Tensor | None = None) -> Tensor:
    """Dispatch by name: ``sigmoid``, ``relu``, ``prelu`` or ``softmax``."""
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "prelu":
        if slope is None:
            raise ValueError("prelu needs a slope tensor")
        return prelu(x, slope)
    if kind in ("softmax", "softmax-lastdim"):
        return softmax(x)
    raise ValueError(f"unknown activation {kind!r}")


# --------------------------------------------------------------------- pooling
def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over H and W, keeping dims: ``(N, C, H, W) -> (N, C, 1, 1)``."""
    x = as_tensor(x)
    h, w = x.shape[-2:]
    out = x.data.mean(axis=(-2, -1), keepdims=True)
    return make_result(out, (x,), lambda g: (np.broadcast_to(g / (h * w), x.shape).copy(),))


# ------------------------------------------------------------------ resampling
def bilinear_matrix(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """1-D interpolation matrix with half-pixel (align-corners-false) centres."""
    if n_out < 1 or n_in < 1:
        raise ShapeError(f"bilinear sizes must be >= 1, got {n_in} -> {n_out}")
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in), dtype=dtype)
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def resample_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of the last two axes to ``(out_h, out_w)``."""
    x = as_tensor(x)
    h, w = x.shape[-2:]
    if (h, w) == (out_h, out_w):
        return make_result(x.data.copy(), (x,), lambda g: (g,))
    ry = bilinear_matrix(h, out_h, x.dtype)
    rx = bilinear_matrix(w, out_w, x.dtype)
    out = ry @ x.data @ rx.T

    def backward(g):
        return (ry.T @ g @ rx,)

    return make_result(out, (x,), backward)
