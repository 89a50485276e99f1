"""Image container and the pixel-level operations shared by every module.

Images are stored channel-planar as float32 arrays of shape (C, H, W).
All operations are pure: they return new grids and never mutate inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Sobel kernels, horizontal and vertical derivative.
SOBEL_HX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32)
SOBEL_HY = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float32)


class ImageGrid:
    """Single- or multi-channel raster of float32 values.

    ``data`` is (C, H, W), row-major within each channel plane.  The array
    is frozen after construction so grids can be shared across threads.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected (H, W) or (C, H, W) data, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty image")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.data = arr

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def plane(self, c: int = 0) -> np.ndarray:
        """Read-only (H, W) view of one channel."""
        return self.data[c]

    def __repr__(self):
        return f"ImageGrid({self.channels}x{self.height}x{self.width})"


@dataclass(frozen=True)
class NormalizationParams:
    """Min-max range for y = (x - min) / ((max - min) + eps).

    min/max are computed once over the whole training dataset and stored
    with the model, so training and inference share one mapping.
    """

    min: float
    max: float
    epsilon: float = 1e-6

    def __post_init__(self):
        if not (self.max >= self.min):
            raise ValueError(f"max ({self.max}) must be >= min ({self.min})")
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")

    def to_dict(self) -> dict:
        return {"min": float(self.min), "max": float(self.max), "epsilon": float(self.epsilon)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(min=float(d["min"]), max=float(d["max"]), epsilon=float(d.get("epsilon", 1e-6)))


def percentile_value(values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the value at position ceil(p/100 * n) of the
    sorted sample (1-based).  For 1..100 at p=90 this is exactly 90."""
    if not (0.0 < p <= 100.0):
        raise ValueError(f"percentile must be in (0, 100], got {p}")
    flat = np.sort(values, axis=None)
    n = flat.size
    rank = math.ceil(p / 100.0 * n)
    return float(flat[max(rank, 1) - 1])


def clip_percentile(img: ImageGrid, p: float = 90.0) -> ImageGrid:
    """Clip each channel at its p-th percentile (nearest-rank).

    Values above the percentile are replaced by it; everything else is
    untouched.  Rejects non-finite input.
    """
    if not np.isfinite(img.data).all():
        raise ValueError("image contains non-finite values")
    out = np.empty_like(img.data)
    for c in range(img.channels):
        cap = percentile_value(img.data[c], p)
        out[c] = np.minimum(img.data[c], cap)
    return ImageGrid(out)


def normalize(img: ImageGrid, params: NormalizationParams) -> ImageGrid:
    """y = (x - min) / ((max - min) + eps); in [0, 1] for x in [min, max]."""
    scale = (params.max - params.min) + params.epsilon
    return ImageGrid((img.data - params.min) / scale)


def denormalize(img: ImageGrid, params: NormalizationParams) -> ImageGrid:
    """Inverse of :func:`normalize`: x = y * ((max - min) + eps) + min."""
    scale = (params.max - params.min) + params.epsilon
    return ImageGrid(img.data * scale + params.min)


def _conv3x3_replicate(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 cross-correlation with edge replication, output same size.

    Accumulates in float64 so opposing taps cancel exactly and constant
    images map to zero gradient with no rounding residue.
    """
    padded = np.pad(plane.astype(np.float64), 1, mode="edge")
    out = np.zeros(plane.shape, dtype=np.float64)
    h, w = plane.shape
    for di in range(3):
        for dj in range(3):
            out += float(kernel[di, dj]) * padded[di:di + h, dj:dj + w]
    return out.astype(np.float32)


def sobel_gradient(img: ImageGrid) -> ImageGrid:
    """Gradient magnitude sqrt(Hx^2 + Hy^2) with edge-replicated borders.

    Single-channel only; constant images map to exact zero.
    """
    if img.channels != 1:
        raise ValueError(f"sobel_gradient expects a single channel, got {img.channels}")
    plane = img.plane(0)
    gx = _conv3x3_replicate(plane, SOBEL_HX)
    gy = _conv3x3_replicate(plane, SOBEL_HY)
    return ImageGrid(np.sqrt(gx * gx + gy * gy))


def histogram(img: ImageGrid, bins: int, value_range: tuple[float, float]) -> np.ndarray:
    """Per-pixel histogram; out-of-range values land in the edge bins so
    counts always sum to the pixel count."""
    if bins <= 0:
        raise ValueError("bins must be positive")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not (hi > lo):
        raise ValueError(f"range upper bound must exceed lower, got ({lo}, {hi})")
    clipped = np.clip(img.data, lo, hi)
    counts, _ = np.histogram(clipped, bins=bins, range=(lo, hi))
    return counts


def to_png(img: ImageGrid, path, stretch: tuple[float, float] | None = None) -> None:
    """8-bit PNG export for human inspection only, never a round trip.

    ``stretch`` maps [lo, hi] to [0, 255]; defaults to [0, 1].
    """
    from PIL import Image

    lo, hi = (0.0, 1.0) if stretch is None else (float(stretch[0]), float(stretch[1]))
    span = max(hi - lo, 1e-12)
    scaled = np.clip((img.data - lo) / span, 0.0, 1.0)
    u8 = (scaled * 255.0 + 0.5).astype(np.uint8)
    if img.channels == 1:
        Image.fromarray(u8[0], mode="L").save(path)
    elif img.channels == 3:
        Image.fromarray(np.moveaxis(u8, 0, -1), mode="RGB").save(path)
    else:
        # fall back to the first channel for other plane counts
        Image.fromarray(u8[0], mode="L").save(path)
