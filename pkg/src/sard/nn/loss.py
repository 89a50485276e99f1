"""Composite training loss: MSE + (1 - SSIM) + total variation.

    L = alpha * MSE(x, x*) + beta * (1 - SSIM(x, x*)) + gamma * TV(x)

MSE is the per-image mean squared error.  SSIM is the single
global-statistics index with dynamic range 1 (c1 = 1e-4, c2 = 9e-4).
TV sums sqrt(dx^2 + dy^2) over the (W-1) x (H-1) sites where both the
rightward and downward differences exist.  All terms are averaged over
the batch, and the returned gradient is exact; the only concession is a
1e-8 floor inside the TV gradient's division, which leaves the loss
value itself untouched.
"""

from __future__ import annotations

import numpy as np

SSIM_C1 = (0.01 * 1.0) ** 2
SSIM_C2 = (0.03 * 1.0) ** 2
TV_EPS = 1e-8


def ssim_flat(x: np.ndarray, y: np.ndarray):
    """Global SSIM over flattened samples, with its gradient w.r.t. x."""
    n = x.size
    mx, my = x.mean(), y.mean()
    xc, yc = x - mx, y - my
    vx = (xc * xc).mean()
    vy = (yc * yc).mean()
    cxy = (xc * yc).mean()
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * cxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = vx + vy + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    grad = (2.0 / (n * b1 * b2)) * (a1 * yc + my * a2 - s * (b1 * xc + mx * b2))
    return s, grad


def tv_plane(plane: np.ndarray):
    """Total variation of one (H, W) plane, with gradient."""
    dx = plane[:-1, 1:] - plane[:-1, :-1]
    dy = plane[1:, :-1] - plane[:-1, :-1]
    mag = np.sqrt(dx * dx + dy * dy)
    value = float(mag.sum())
    denom = np.maximum(mag, TV_EPS)
    px = dx / denom
    py = dy / denom
    grad = np.zeros_like(plane)
    grad[:-1, :-1] -= px + py
    grad[:-1, 1:] += px
    grad[1:, :-1] += py
    return value, grad


def composite_loss(x: np.ndarray, target: np.ndarray, alpha: float = 1.0,
                   beta: float = 1.0, gamma: float = 1e-5):
    """Batch-mean loss and its gradient w.r.t. x, both exact.

    x and target are (B, C, H, W); per-image terms are averaged over B.
    """
    if x.shape != target.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {target.shape}")
    if x.ndim != 4:
        raise ValueError(f"expected (B, C, H, W), got {x.shape}")
    bsz = x.shape[0]
    npix = x[0].size
    total = 0.0
    grad = np.empty_like(x)
    for i in range(bsz):
        xi, ti = x[i], target[i]
        diff = xi - ti
        mse = float((diff * diff).mean())
        g = (alpha * 2.0 / npix) * diff

        s, gs = ssim_flat(xi.ravel(), ti.ravel())
        g -= beta * gs.reshape(xi.shape)

        tv_total = 0.0
        for c in range(xi.shape[0]):
            v, gt = tv_plane(xi[c])
            tv_total += v
            g[c] += gamma * gt

        total += alpha * mse + beta * (1.0 - float(s)) + gamma * tv_total
        grad[i] = g / bsz
    return total / bsz, grad
