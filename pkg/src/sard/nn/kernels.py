"""Same-padding 2-D convolution kernels, compiled and fallback.

The hot path of both training and inference is 3x3 stride-1 convolution.
The compiled extension lowers it to an im2col buffer plus one BLAS GEMM
per image, which keeps the working set inside cache for 96x96 patches.
The numpy fallback builds the same buffer with stride tricks so the two
backends agree to rounding error.

Backend selection happens at import: the extension wins when present,
and SARD_BACKEND=numpy|cython forces the choice (forcing cython without
the built extension is an error rather than a silent fallback).
"""

from __future__ import annotations

import logging
import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

log = logging.getLogger(__name__)

try:
    from . import _convext
except ImportError:
    _convext = None


def _check_shapes(x, w, b):
    if x.ndim != 4 or w.ndim != 4 or b.ndim != 1:
        raise ValueError(f"expected x (B,C,H,W), w (O,C,kh,kw), b (O,), "
                         f"got {x.shape}, {w.shape}, {b.shape}")
    if w.shape[1] != x.shape[1]:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, kernel expects {w.shape[1]}")
    if w.shape[0] != b.shape[0]:
        raise ValueError(f"bias length {b.shape[0]} != output channels {w.shape[0]}")
    if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
        raise ValueError(f"kernel dims must be odd for same padding, got {w.shape[2:]}")


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*kh*kw, H*W) patch matrix, zero padded."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, h * w)


def _conv2d_forward_np(x, w, b):
    bsz, _, h, wid = x.shape
    co, _, kh, kw = w.shape
    col = _im2col(x, kh, kw)
    out = np.matmul(w.reshape(co, -1), col)
    out += b[:, np.newaxis]
    return out.reshape(bsz, co, h, wid)


def _conv2d_backward_np(x, w, gy):
    bsz, ci, h, wid = x.shape
    co, _, kh, kw = w.shape
    hw = h * wid
    col = _im2col(x, kh, kw)
    gy2 = gy.reshape(bsz, co, hw)

    gb = gy2.sum(axis=(0, 2))
    gw = np.matmul(gy2, col.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)

    colg = np.matmul(w.reshape(co, -1).T, gy2).reshape(bsz, ci, kh, kw, h, wid)
    ph, pw = kh // 2, kw // 2
    gxp = np.zeros((bsz, ci, h + 2 * ph, wid + 2 * pw), dtype=x.dtype)
    for di in range(kh):
        for dj in range(kw):
            gxp[:, :, di:di + h, dj:dj + wid] += colg[:, :, di, dj]
    gx = gxp[:, :, ph:ph + h, pw:pw + wid]
    return np.ascontiguousarray(gx), gw, gb


_requested = os.environ.get("SARD_BACKEND", "").strip().lower()
if _requested not in ("", "numpy", "cython"):
    raise ValueError(f"SARD_BACKEND must be 'numpy' or 'cython', got {_requested!r}")
if _requested == "cython" and _convext is None:
    raise ImportError("SARD_BACKEND=cython but the compiled extension is not built")
if _requested == "numpy" or _convext is None:
    BACKEND = "numpy"
    if _requested == "" and _convext is None:
        log.info("compiled convolution extension not available, using numpy fallback")
else:
    BACKEND = "cython"


def backend_name() -> str:
    """Active kernel backend, recorded in run configs for provenance."""
    return BACKEND


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-correlate x (B,C,H,W) with w (O,C,kh,kw) + b, same padding."""
    _check_shapes(x, w, b)
    x = np.ascontiguousarray(x)
    if BACKEND == "cython":
        return _convext.conv2d_forward(x, np.ascontiguousarray(w), np.ascontiguousarray(b))
    return _conv2d_forward_np(x, w, b)


def conv2d_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    """Gradients (gx, gw, gb) of conv2d_forward given upstream gy."""
    _check_shapes(x, w, np.zeros(w.shape[0], dtype=w.dtype))
    if gy.shape != (x.shape[0], w.shape[0], x.shape[2], x.shape[3]):
        raise ValueError(f"gradient shape {gy.shape} inconsistent with forward output")
    x = np.ascontiguousarray(x)
    gy = np.ascontiguousarray(gy)
    if BACKEND == "cython":
        return _convext.conv2d_backward(x, np.ascontiguousarray(w), gy)
    return _conv2d_backward_np(x, w, gy)
