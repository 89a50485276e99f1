"""Export pipeline: search, fetch, resample to 10 m, write stack + sidecar.

Frames land on one common pixel grid via bilinear resampling, so the
stack is co-registered regardless of per-pass footprint jitter.  Output
files appear atomically: a failed or partial export leaves nothing
behind.
"""

from __future__ import annotations

import json
import os

import numpy as np
from scipy.ndimage import map_coordinates

from . import sarg_io
from .catalog import (AuthError, CatalogError, EmptyResultError, NativeFrame,
                      PartialDownloadError)
from .request import PIXEL_M, ExportRequest


def _resample(frame: NativeFrame, n: int) -> np.ndarray:
    """Bilinear resampling of a native frame onto the n x n common grid."""
    c, nh, nw = frame.data.shape
    dy, dx = frame.offset_px
    rows = np.arange(n, dtype=np.float64) + dy
    cols = np.arange(n, dtype=np.float64) + dx
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((c, n, n), dtype=np.float32)
    for ch in range(c):
        out[ch] = map_coordinates(frame.data[ch].astype(np.float64),
                                  [rr, cc], order=1, mode="nearest")
    return out


def _base_path(out: str) -> str:
    return out[:-5] if out.endswith(".sarg") else out


def export_stack(request: ExportRequest, catalog) -> dict:
    """Run one export; returns {"stack", "meta", "frames"} on success.

    Raises EmptyResultError when the window holds no acquisitions and
    PartialDownloadError when any fetch fails mid-series; neither case
    writes a file.
    """
    infos = sorted(catalog.search(request), key=lambda i: i.date)
    if not infos:
        raise EmptyResultError(
            f"no {request.polarization} acquisitions over "
            f"({request.lat:.4f}, {request.lon:.4f}) "
            f"between {request.start} and {request.end}")

    n = request.grid_size
    frames = np.empty((len(infos), 1, n, n), dtype=np.float32)
    for k, info in enumerate(infos):
        try:
            native = catalog.fetch(request, info)
        except (AuthError, EmptyResultError, PartialDownloadError):
            raise
        except CatalogError as exc:
            raise PartialDownloadError(
                f"fetched {k} of {len(infos)} frames, then {info.date}: {exc}"
            ) from exc
        if native.data.shape[0] != 1:
            raise PartialDownloadError(
                f"{info.date}: expected a single-band frame, got {native.data.shape}")
        frames[k] = _resample(native, n)

    base = _base_path(request.out)
    stack_path = base + ".sarg"
    meta_path = base + ".meta.json"
    meta = {
        "tool": "gee-export",
        "version": "0.1.0",
        "collection": "COPERNICUS/S1_GRD_FLOAT",
        "units": "linear power",
        "footprint": {"lat": request.lat, "lon": request.lon,
                      "buffer_m": request.buffer_m},
        "grid": {"width": n, "height": n, "pixel_m": PIXEL_M},
        "polarization": request.polarization,
        "dates": [info.date.isoformat() for info in infos],
        "frames": [info.to_dict() for info in infos],
    }
    stack_tmp, meta_tmp = stack_path + ".tmp", meta_path + ".tmp"
    try:
        sarg_io.write_stack(stack_tmp, frames)
        with open(meta_tmp, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(stack_tmp, stack_path)
        os.replace(meta_tmp, meta_path)
    except OSError:
        for tmp in (stack_tmp, meta_tmp):
            if os.path.exists(tmp):
                os.remove(tmp)
        raise
    return {"stack": stack_path, "meta": meta_path, "frames": len(infos)}
