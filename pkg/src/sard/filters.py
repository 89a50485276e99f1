"""Classical single-product despeckling filters.

All filters operate on single-channel intensity images with
edge-replicated borders and map constant images to themselves.  The
adaptive filters (Lee family, Kuan, Frost) assume fully developed
multiplicative speckle with noise variation coefficient Cu = 1/sqrt(L).

Local window statistics come from box filters; variances are computed
in float64 to avoid cancellation before casting back to float32.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import median_filter as _nd_median
from scipy.ndimage import uniform_filter

from .grid import ImageGrid

_TINY = 1e-30


def _plane(img: ImageGrid) -> np.ndarray:
    if img.channels != 1:
        raise ValueError(f"filters expect a single channel, got {img.channels}")
    return img.plane(0).astype(np.float64)


def _check_window(win: int) -> None:
    if win < 3 or win % 2 == 0:
        raise ValueError(f"window size must be odd and >= 3, got {win}")


def _local_stats(plane: np.ndarray, win: int):
    """Window mean and variance, edge replicated."""
    m = uniform_filter(plane, size=win, mode="nearest")
    m2 = uniform_filter(plane * plane, size=win, mode="nearest")
    var = np.maximum(m2 - m * m, 0.0)
    return m, var


def mean_filter(img: ImageGrid, win: int = 7) -> ImageGrid:
    """Window mean."""
    _check_window(win)
    return ImageGrid(uniform_filter(_plane(img), size=win, mode="nearest").astype(np.float32))


def median_filter(img: ImageGrid, win: int = 7) -> ImageGrid:
    """Window median."""
    _check_window(win)
    return ImageGrid(_nd_median(_plane(img), size=win, mode="nearest").astype(np.float32))


def lee_filter(img: ImageGrid, win: int = 7, looks: int = 4) -> ImageGrid:
    """Lee: x = mu + W (y - mu) with W = 1 - Cu^2 mu^2 / sigma^2,
    clamped to [0, 1]; homogeneous windows collapse to the mean."""
    _check_window(win)
    y = _plane(img)
    m, var = _local_stats(y, win)
    cu2 = 1.0 / looks
    weight = np.clip(1.0 - cu2 * m * m / np.maximum(var, _TINY), 0.0, 1.0)
    return ImageGrid((m + weight * (y - m)).astype(np.float32))


def kuan_filter(img: ImageGrid, win: int = 7, looks: int = 4) -> ImageGrid:
    """Kuan: W = (1 - Cu^2 mu^2 / sigma^2) / (1 + Cu^2), clamped to [0, 1]."""
    _check_window(win)
    y = _plane(img)
    m, var = _local_stats(y, win)
    cu2 = 1.0 / looks
    weight = np.clip((1.0 - cu2 * m * m / np.maximum(var, _TINY)) / (1.0 + cu2), 0.0, 1.0)
    return ImageGrid((m + weight * (y - m)).astype(np.float32))


def enhanced_lee_filter(img: ImageGrid, win: int = 7, looks: int = 4,
                        damping: float = 1.0) -> ImageGrid:
    """Three-regime Lee: full smoothing below Cu, damped weighting between
    Cu and Cmax = sqrt(3) Cu, identity above Cmax (point targets)."""
    _check_window(win)
    y = _plane(img)
    m, var = _local_stats(y, win)
    cu = 1.0 / np.sqrt(looks)
    cmax = np.sqrt(3.0) * cu
    ci = np.sqrt(var) / np.maximum(m, _TINY)
    with np.errstate(over="ignore"):
        w_mid = np.exp(-damping * (ci - cu) / np.maximum(cmax - ci, _TINY))
    out = np.where(ci <= cu, m,
                   np.where(ci >= cmax, y, m + w_mid * (y - m)))
    return ImageGrid(out.astype(np.float32))


def frost_filter(img: ImageGrid, win: int = 7, damping: float = 2.0) -> ImageGrid:
    """Frost: exponentially damped kernel, sharper where the local
    coefficient of variation is high.

    weight(t) = exp(-damping * (sigma^2 / mu^2) * |t|), |t| the distance
    from the window center, normalized per pixel.
    """
    _check_window(win)
    y = _plane(img)
    m, var = _local_stats(y, win)
    ci2 = var / np.maximum(m * m, _TINY)
    r = win // 2
    ypad = np.pad(y, r, mode="edge")
    h, w = y.shape
    acc = np.zeros_like(y)
    norm = np.zeros_like(y)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            dist = np.hypot(dy, dx)
            wgt = np.exp(-damping * ci2 * dist)
            acc += wgt * ypad[r + dy:r + dy + h, r + dx:r + dx + w]
            norm += wgt
    return ImageGrid((acc / norm).astype(np.float32))


def bilateral_filter(img: ImageGrid, spatial_sigma: float = 1.5,
                     range_sigma: float = 0.1) -> ImageGrid:
    """Joint spatial/range Gaussian weighting, normalized per pixel.

    The window radius follows the usual int(4 * sigma + 0.5) truncation,
    so the infinite-range-sigma limit matches a plain Gaussian blur.
    """
    if spatial_sigma <= 0 or range_sigma <= 0:
        raise ValueError("sigmas must be positive")
    y = _plane(img)
    r = max(1, int(4.0 * spatial_sigma + 0.5))
    ypad = np.pad(y, r, mode="edge")
    h, w = y.shape
    acc = np.zeros_like(y)
    norm = np.zeros_like(y)
    inv2ss = 1.0 / (2.0 * spatial_sigma * spatial_sigma)
    inv2rs = 1.0 / (2.0 * range_sigma * range_sigma)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = ypad[r + dy:r + dy + h, r + dx:r + dx + w]
            diff = shifted - y
            wgt = np.exp(-(dy * dy + dx * dx) * inv2ss - diff * diff * inv2rs)
            acc += wgt * shifted
            norm += wgt
    return ImageGrid((acc / norm).astype(np.float32))


# name -> (callable, parameter sweep used by the compare command)
FILTERS = {
    "mean": (mean_filter, [{"win": w} for w in (5, 7, 9)]),
    "median": (median_filter, [{"win": w} for w in (5, 7, 9)]),
    "lee": (lee_filter, [{"win": w} for w in (5, 7, 9)]),
    "lee_enhanced": (enhanced_lee_filter, [{"win": w} for w in (5, 7, 9)]),
    "kuan": (kuan_filter, [{"win": w} for w in (5, 7, 9)]),
    "frost": (frost_filter, [{"win": w} for w in (5, 7, 9)]),
    "bilateral": (bilateral_filter, [{"spatial_sigma": s} for s in (1.0, 1.5, 2.0)]),
}
