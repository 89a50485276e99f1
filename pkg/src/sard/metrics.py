"""Evaluation metrics and the CSV report.

PSNR uses the reference image's own peak:  10 log10(max(ref)^2 / MSE),
with +inf as the identical-image sentinel.  SSIM is the global
single-statistics index over the whole image (dynamic range 1); a
windowed mean variant exists for sensitivity checks.  ENL is mu^2 over
the unbiased sample variance of a homogeneous region.  Edge
preservation compares Sobel magnitude maps; distribution preservation
fits a Gamma to the truth by moments and reports the two-sample KS
statistic between truth and filtered pixels.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.stats import ks_2samp

from .grid import ImageGrid, sobel_gradient

SSIM_C1 = (0.01 * 1.0) ** 2
SSIM_C2 = (0.03 * 1.0) ** 2

REPORT_FIELDS = ("id", "psnr_noisy", "psnr_filtered", "ssim_noisy", "ssim_filtered",
                 "enl_noisy", "enl_filtered", "edge_median_absdiff", "ks_statistic")


class DegenerateRegionError(ValueError):
    """Constant region: ENL (or a Gamma fit) is undefined."""


def _check_shapes(a: ImageGrid, b: ImageGrid) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(reference: ImageGrid, test: ImageGrid) -> float:
    """10 log10(max(reference)^2 / MSE); +inf when the images coincide."""
    _check_shapes(reference, test)
    ref = reference.data.astype(np.float64)
    diff = ref - test.data.astype(np.float64)
    mse = float((diff * diff).mean())
    if mse == 0.0:
        return math.inf
    peak = float(ref.max())
    return 10.0 * math.log10(peak * peak / mse)


def ssim(x: ImageGrid, y: ImageGrid, window: int | None = None) -> float:
    """Structural similarity with whole-image statistics (default).

    ``window`` switches to the mean of local SSIM values over
    window x window box neighborhoods, for sensitivity analysis only.
    """
    _check_shapes(x, y)
    a = x.data.astype(np.float64)
    b = y.data.astype(np.float64)
    if window is None:
        mx, my = a.mean(), b.mean()
        vx, vy = a.var(), b.var()
        cxy = ((a - mx) * (b - my)).mean()
        return float(((2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2))
                     / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)))
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    vals = []
    for c in range(a.shape[0]):
        pa, pb = a[c], b[c]
        ma = uniform_filter(pa, window, mode="nearest")
        mb = uniform_filter(pb, window, mode="nearest")
        va = uniform_filter(pa * pa, window, mode="nearest") - ma * ma
        vb = uniform_filter(pb * pb, window, mode="nearest") - mb * mb
        cab = uniform_filter(pa * pb, window, mode="nearest") - ma * mb
        smap = ((2 * ma * mb + SSIM_C1) * (2 * cab + SSIM_C2)) \
            / ((ma * ma + mb * mb + SSIM_C1) * (np.maximum(va, 0) + np.maximum(vb, 0) + SSIM_C2))
        vals.append(smap.mean())
    return float(np.mean(vals))


def enl(img: ImageGrid, region: tuple[int, int, int, int] | None = None) -> float:
    """mu^2 / sigma^2 over a homogeneous region (x, y, w, h); None = full frame."""
    data = img.data
    if region is not None:
        x, y, w, h = (int(v) for v in region)
        if x < 0 or y < 0 or x + w > img.width or y + h > img.height or w < 1 or h < 1:
            raise ValueError(f"region {region} outside {img.width}x{img.height} bounds")
        data = data[:, y:y + h, x:x + w]
    flat = data.astype(np.float64).ravel()
    if flat.size < 2:
        raise ValueError("ENL region needs at least 2 pixels")
    mu = flat.mean()
    var = flat.var(ddof=1)
    if var == 0.0:
        raise DegenerateRegionError("constant region has undefined ENL")
    return float(mu * mu / var)


def edge_preservation(truth: ImageGrid, filtered: ImageGrid, bins: int = 51,
                      value_range: tuple[float, float] = (-1.0, 1.0)) -> dict:
    """Histogram and summary stats of sobel(filtered) - sobel(truth)."""
    _check_shapes(truth, filtered)
    diff = sobel_gradient(filtered).data - sobel_gradient(truth).data
    clipped = np.clip(diff, value_range[0], value_range[1])
    counts, edges = np.histogram(clipped, bins=bins, range=value_range)
    return {
        "histogram": counts,
        "bin_edges": edges,
        "median_absdiff": float(np.median(np.abs(diff))),
        "max_absdiff": float(np.abs(diff).max()),
    }


def distribution_check(truth: ImageGrid, filtered: ImageGrid) -> dict:
    """Moment-matched Gamma fit of the truth plus truth/filtered KS distance."""
    _check_shapes(truth, filtered)
    t = truth.data.astype(np.float64).ravel()
    f = filtered.data.astype(np.float64).ravel()
    mu = t.mean()
    var = t.var(ddof=1)
    if var == 0.0 or mu == 0.0:
        raise DegenerateRegionError("constant truth: Gamma fit undefined")
    stat = float(ks_2samp(t, f, method="asymp").statistic)
    return {
        "ks_statistic": stat,
        "shape": float(mu * mu / var),
        "scale": float(var / mu),
    }


def evaluate_pair(pair_id, truth: ImageGrid, noisy: ImageGrid, filtered: ImageGrid,
                  region: tuple[int, int, int, int] | None = None,
                  ssim_window: int | None = None) -> dict:
    """One report row comparing the noisy input and a filtered result."""
    return {
        "id": pair_id,
        "psnr_noisy": psnr(truth, noisy),
        "psnr_filtered": psnr(truth, filtered),
        "ssim_noisy": ssim(truth, noisy, ssim_window),
        "ssim_filtered": ssim(truth, filtered, ssim_window),
        "enl_noisy": enl(noisy, region),
        "enl_filtered": enl(filtered, region),
        "edge_median_absdiff": edge_preservation(truth, filtered)["median_absdiff"],
        "ks_statistic": distribution_check(truth, filtered)["ks_statistic"],
    }


def aggregate_rows(rows) -> dict:
    """Arithmetic mean of every numeric column; id becomes 'aggregate'."""
    agg = {"id": "aggregate"}
    for key in REPORT_FIELDS[1:]:
        agg[key] = float(np.mean([row[key] for row in rows])) if rows else math.nan
    return agg


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.4f}"
    return str(value)


def write_report(path, rows) -> dict:
    """Write per-image rows plus the aggregate row; returns the aggregate."""
    agg = aggregate_rows(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for row in list(rows) + [agg]:
            writer.writerow([_fmt(row[k]) for k in REPORT_FIELDS])
    return agg
