"""Network layers with explicit forward/backward passes.

Each layer owns its parameter arrays (updated in place by the optimizer),
keeps whatever it needs for the backward pass only when asked to
(train=True), and exposes (name, array) lists for parameters, gradients,
and non-trainable state.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Conv2D:
    """3x3 (or any odd size) same-padding cross-correlation with bias.

    Weights use fan-in-scaled uniform initialization,
    limit = sqrt(6 / (in_channels * kh * kw)).
    """

    def __init__(self, in_channels: int, out_channels: int, ksize: int = 3,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.ksize = ksize
        fan_in = in_channels * ksize * ksize
        limit = np.sqrt(6.0 / fan_in)
        if rng is None:
            rng = np.random.default_rng(0)
        self.w = rng.uniform(-limit, limit,
                             (out_channels, in_channels, ksize, ksize)).astype(dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.gw = None
        self.gb = None
        self._x = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._x = x
        return kernels.conv2d_forward(x, self.w, self.b)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before a train-mode forward")
        gx, self.gw, self.gb = kernels.conv2d_backward(self._x, self.w, gy)
        self._x = None
        return gx

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [("w", self.gw), ("b", self.gb)]

    def state(self):
        return []


class BatchNorm:
    """Per-channel batch normalization over batch and spatial axes.

    Train mode standardizes with batch statistics (population variance)
    and updates the running statistics as
    running = momentum * running + (1 - momentum) * batch.
    Inference standardizes with the running statistics.
    """

    def __init__(self, channels: int, momentum: float = 0.99, eps: float = 1e-5,
                 dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.ggamma = None
        self.gbeta = None
        self._xhat = None
        self._inv_std = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        cview = (1, self.channels, 1, 1)
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch_norm train mode needs batch size >= 2")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean.reshape(cview)) * inv_std.reshape(cview)
            m = x.dtype.type(self.momentum)
            self.running_mean *= m
            self.running_mean += (1 - m) * mean.astype(x.dtype)
            self.running_var *= m
            self.running_var += (1 - m) * var.astype(x.dtype)
            self._xhat = xhat
            self._inv_std = inv_std.astype(x.dtype)
            return self.gamma.reshape(cview) * xhat + self.beta.reshape(cview)
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        scale = (self.gamma * inv_std).reshape(cview)
        shift = (self.beta - self.gamma * self.running_mean * inv_std).reshape(cview)
        return x * scale + shift

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._xhat is None:
            raise RuntimeError("backward called before a train-mode forward")
        cview = (1, self.channels, 1, 1)
        xhat = self._xhat
        self.ggamma = (gy * xhat).sum(axis=(0, 2, 3)).astype(gy.dtype)
        self.gbeta = gy.sum(axis=(0, 2, 3)).astype(gy.dtype)
        # dx = (gamma / std) * (g - mean(g) - xhat * mean(g * xhat)),
        # means taken over the batch/spatial reduction axes
        n = gy.shape[0] * gy.shape[2] * gy.shape[3]
        mean_g = self.gbeta / n
        mean_gx = self.ggamma / n
        gx = (self.gamma * self._inv_std).reshape(cview) * (
            gy - mean_g.reshape(cview) - xhat * mean_gx.reshape(cview))
        self._xhat = None
        self._inv_std = None
        return gx.astype(gy.dtype, copy=False)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grads(self):
        return [("gamma", self.ggamma), ("beta", self.gbeta)]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class ReLU:
    """Elementwise max(0, x)."""

    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        out = np.maximum(x, 0)
        if train:
            self._mask = x > 0
        return out

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward called before a train-mode forward")
        gx = gy * self._mask
        self._mask = None
        return gx

    def params(self):
        return []

    def grads(self):
        return []

    def state(self):
        return []
