"""Inference: pre-process, forward, de-normalize, with tiling for large scenes.

A scene wider or taller than the tile size is processed in overlapping
windows.  Each window carries a context margin equal to the network's
receptive radius, so away from the 8-pixel blend seams the stitched
output matches a hypothetical single-pass run; inside the seams the two
tile predictions are linearly cross-faded.
"""

from __future__ import annotations

import numpy as np

from ..grid import ImageGrid, NormalizationParams, clip_percentile, denormalize, normalize
from .model import ResidualModel


def _starts(total: int, tile: int, stride: int):
    if total <= tile:
        return [0]
    starts = list(range(0, total - tile + 1, stride))
    if starts[-1] != total - tile:
        starts.append(total - tile)
    return starts


def _core_weights(length: int, ramp_lo: bool, ramp_hi: bool, overlap: int) -> np.ndarray:
    w = np.ones(length, dtype=np.float32)
    ramp = (np.arange(overlap, dtype=np.float32) + 1.0) / (overlap + 1.0)
    if ramp_lo:
        w[:overlap] = ramp
    if ramp_hi:
        w[-overlap:] = ramp[::-1]
    return w


def despeckle(model: ResidualModel, img: ImageGrid, params: NormalizationParams,
              clip_p: float | None = 90.0, tile: int | None = 96,
              overlap: int = 8) -> ImageGrid:
    """Filter a raw intensity image with a trained model.

    Pre-processing mirrors training: percentile clip (skipped when
    ``clip_p`` is None), min-max normalization with the persisted params,
    clamp to [0, 1].  ``tile=None`` forces a single full-scene pass.
    """
    if params is None:
        raise ValueError("normalization params are required for inference")
    if img.channels != model.channels:
        raise ValueError(f"model expects {model.channels} channels, image has {img.channels}")
    pre = clip_percentile(img, clip_p) if clip_p is not None else img
    xn = np.clip(normalize(pre, params).data, 0.0, 1.0)
    c, h, w = xn.shape

    if tile is None or (h <= tile and w <= tile):
        filtered, _ = model.forward(xn[np.newaxis], train=False)
        return denormalize(ImageGrid(filtered[0]), params)

    margin = model.receptive_margin
    stride = tile - 2 * margin - overlap
    if stride < 1:
        raise ValueError(f"tile {tile} too small for margin {margin} and overlap {overlap}")
    acc = np.zeros((c, h, w), dtype=np.float32)
    wsum = np.zeros((h, w), dtype=np.float32)
    for ys in _starts(h, tile, stride):
        th = min(tile, h)
        top = margin if ys > 0 else 0
        bottom = th - (margin if ys + th < h else 0)
        for xs in _starts(w, tile, stride):
            tw = min(tile, w)
            left = margin if xs > 0 else 0
            right = tw - (margin if xs + tw < w else 0)
            window = xn[:, ys:ys + th, xs:xs + tw]
            pred, _ = model.forward(window[np.newaxis], train=False)
            core = pred[0][:, top:bottom, left:right]
            wy = _core_weights(bottom - top, ys > 0, ys + th < h, overlap)
            wx = _core_weights(right - left, xs > 0, xs + tw < w, overlap)
            wgt = np.outer(wy, wx)
            acc[:, ys + top:ys + bottom, xs + left:xs + right] += core * wgt
            wsum[ys + top:ys + bottom, xs + left:xs + right] += wgt
    out = acc / wsum[np.newaxis]
    return denormalize(ImageGrid(out), params)
