"""Parameterised building blocks operating on NCHW tensors.

Parameters live in a shared :class:`ParamStore` under hierarchical names.
Each parameter is initialised from a generator seeded by ``(seed, name)``,
so initial values do not depend on creation order and two networks that
share parameter names start from identical values.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..autodiff import (ParamStore, Tensor, concat, conv2d, global_avg_pool, linear, prelu,
                        resample_bilinear, sigmoid, softmax)
from ..autodiff.tensor import ShapeError, get_default_dtype


def param_rng(seed: int, name: str) -> np.random.Generator:
    h = hashlib.blake2b(f"{seed}/{name}".encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(h, "little"))


class Layers:
    """Initialisers and forward functions bound to one parameter store."""

    def __init__(self, store: ParamStore, seed: int = 0):
        self.store = store
        self.seed = seed

    def _add(self, name: str, value: np.ndarray) -> Tensor:
        return self.store.add(name, Tensor(np.asarray(value, dtype=get_default_dtype())))

    def __getitem__(self, name: str) -> Tensor:
        return self.store[name]

    # -------------------------------------------------------------- init
    def init_conv(self, name: str, cin: int, cout: int, k: int, gain: float = 1.0) -> None:
        std = gain * np.sqrt(2.0 / (cin * k * k))
        self._add(f"{name}.w", param_rng(self.seed, name).standard_normal((cout, cin, k, k)) * std)
        self._add(f"{name}.b", np.zeros(cout))

    def init_linear(self, name: str, din: int, dout: int, gain: float = 1.0) -> None:
        std = gain * np.sqrt(1.0 / din)
        self._add(f"{name}.w", param_rng(self.seed, name).standard_normal((dout, din)) * std)
        self._add(f"{name}.b", np.zeros(dout))

    def init_prelu(self, name: str) -> None:
        self._add(name, np.full((1,), 0.25))

    def init_cab(self, name: str, c: int, reduction: int = 4, gain: float = 0.1) -> None:
        """Residual branch starts small (``gain``) so deep stacks begin near identity."""
        hidden = max(c // reduction, 1)
        self.init_conv(f"{name}.conv1", c, c, 3)
        self.init_prelu(f"{name}.act1")
        self.init_conv(f"{name}.conv2", c, c, 3, gain=gain)
        self.init_linear(f"{name}.down", c, hidden)
        self.init_prelu(f"{name}.act2")
        self.init_linear(f"{name}.up", hidden, c)

    # ----------------------------------------------------------- forward
    def conv(self, name: str, x: Tensor, stride: int = 1) -> Tensor:
        w = self.store[f"{name}.w"]
        return conv2d(x, w, self.store[f"{name}.b"], stride=stride, pad=w.shape[-1] // 2)

    def linear(self, name: str, x: Tensor) -> Tensor:
        return linear(x, self.store[f"{name}.w"], self.store[f"{name}.b"])

    def cab(self, name: str, x: Tensor) -> Tensor:
        """Channel attention block with a residual connection."""
        n, c = x.shape[:2]
        r = self.conv(f"{name}.conv1", x)
        r = prelu(r, self.store[f"{name}.act1"])
        r = self.conv(f"{name}.conv2", r)
        z = global_avg_pool(r).reshape(n, c)
        z = prelu(self.linear(f"{name}.down", z), self.store[f"{name}.act2"])
        scale = sigmoid(self.linear(f"{name}.up", z)).reshape(n, c, 1, 1)
        return x + r * scale

    def cab_stack(self, name: str, x: Tensor, count: int) -> Tensor:
        for i in range(count):
            x = self.cab(f"{name}.{i}", x)
        return x

    def downsample(self, name: str, x: Tensor) -> Tensor:
        if x.shape[-2] % 2 or x.shape[-1] % 2:
            raise ShapeError(f"downsample needs even spatial dims, got {x.shape[-2:]}")
        return self.conv(name, x, stride=2)

    def upsample(self, name: str, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        return self.conv(name, resample_bilinear(x, 2 * h, 2 * w))

    # ------------------------------------------------- text conditioning
    def init_adapter(self, name: str, c: int, dim: int) -> None:
        self._add(f"{name}.fc.w", np.zeros((c, dim)))
        self._add(f"{name}.fc.b", np.zeros(c))
        self._add(f"{name}.gamma", np.ones((1, c, 1, 1)))
        self._add(f"{name}.beta", np.zeros((1, c, 1, 1)))
        self.init_cab(f"{name}.cab", c)

    def adapter(self, name: str, f_a: Tensor, t_m: Tensor) -> Tensor:
        """Metadata adapter: ``CAB(sigmoid(fc(t_M)) * (gamma f_A + beta))``."""
        c = f_a.shape[1]
        if self.store[f"{name}.fc.w"].shape[0] != c:
            raise ShapeError(f"adapter channel dimension mismatch: weights for "
                             f"{self.store[f'{name}.fc.w'].shape[0]} channels, feature has {c}")
        w_m = sigmoid(self.linear(f"{name}.fc", t_m)).reshape(1, c, 1, 1)
        f_at = self.store[f"{name}.gamma"] * f_a + self.store[f"{name}.beta"]
        return self.cab(f"{name}.cab", w_m * f_at)

    def init_prompter(self, name: str, c: int, dim: int, q: int, size: int = 8) -> None:
        rng = param_rng(self.seed, name)
        self._add(f"{name}.dict", rng.standard_normal((q, c, size, size)) * 0.1)
        self.init_linear(f"{name}.fc", dim, q)
        self.init_conv(f"{name}.conv", c, c, 3)

    def prompt_weights(self, name: str, t_u: Tensor) -> Tensor:
        return softmax(self.linear(f"{name}.fc", t_u))

    def prompter(self, name: str, t_u: Tensor, target_hw: tuple[int, int]) -> Tensor:
        """Undersampling prompter: softmax-weighted dictionary, resized, then conv."""
        p_d = self.store[f"{name}.dict"]
        q = p_d.shape[0]
        w_u = self.prompt_weights(name, t_u)
        if w_u.shape[-1] != q:
            raise ShapeError(f"prompt weight count {w_u.shape[-1]} does not match Q={q}")
        p_u = (w_u @ p_d.reshape(q, -1)).reshape((1,) + p_d.shape[1:])
        return self.conv(f"{name}.conv", resample_bilinear(p_u, *target_hw))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-2:] != b.shape[-2:]:
        raise ShapeError(f"spatial dimension mismatch for concat: {a.shape} vs {b.shape}")
    return concat([a, b], axis=1)
