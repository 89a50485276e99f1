"""Catalog backends: where acquisition lists and pixels come from.

A backend exposes ``search(request) -> [FrameInfo]`` and
``fetch(request, info) -> NativeFrame``.  ``EarthEngineCatalog`` talks
to the live GRD FLOAT collection (linear power, never dB) and needs an
authenticated session.  ``SyntheticCatalog`` simulates a 12-day repeat
cycle over a stable speckled footprint, deterministic in (lat, lon,
date), so tests and demos run offline.

Fetched frames stay on their native grid; ``offset_px = (dy, dx)``
places them against the request's common grid: output pixel (i, j)
samples native fractional pixel (i + dy, j + dx).
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .request import PIXEL_M, ExportRequest


class CatalogError(Exception):
    """Catalog query or download failure."""


class AuthError(CatalogError):
    """No usable catalog session."""


class EmptyResultError(CatalogError):
    """The requested window contains no acquisitions."""


class PartialDownloadError(CatalogError):
    """Some frames downloaded, then a fetch failed; nothing was written."""


@dataclass(frozen=True)
class FrameInfo:
    """One acquisition: when, by which platform, on which orbit."""

    date: datetime.date
    platform: str
    relative_orbit: int
    pass_direction: str
    absolute_orbit: int
    asset_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "platform": self.platform,
            "relative_orbit": self.relative_orbit,
            "pass": self.pass_direction,
            "absolute_orbit": self.absolute_orbit,
        }


@dataclass(frozen=True)
class NativeFrame:
    """(C, H, W) pixels on the backend's grid plus its common-grid offset."""

    data: np.ndarray
    offset_px: tuple[float, float]


def _footprint_rng(lat: float, lon: float, *tags: int) -> np.random.Generator:
    """Deterministic stream per footprint; extra tags split sub-streams."""
    keys = [0x53415247, int(round((lat + 90.0) * 1e5)),
            int(round((lon + 180.0) * 1e5)), *tags]
    return np.random.default_rng(np.random.SeedSequence(keys))


class SyntheticCatalog:
    """Offline stand-in with the live backend's statistics.

    Acquisitions repeat every 12 days from a footprint-specific phase.
    Pixels are a smooth stable intensity field times per-date Gamma
    speckle (5 looks, unit mean), sampled on a grid jittered by a
    sub-pixel registration offset per pass, as real GRD footprints are.
    """

    REFERENCE = datetime.date(2014, 10, 3)
    CYCLE_DAYS = 12
    LOOKS = 5

    def search(self, request: ExportRequest) -> list[FrameInfo]:
        g = _footprint_rng(request.lat, request.lon, 0)
        phase = int(g.integers(0, self.CYCLE_DAYS))
        relative_orbit = int(g.integers(1, 176))
        pass_direction = str(g.choice(("ASCENDING", "DESCENDING")))

        start_days = (request.start - self.REFERENCE).days
        first = start_days + (phase - start_days) % self.CYCLE_DAYS
        infos = []
        for days in range(first, (request.end - self.REFERENCE).days + 1,
                          self.CYCLE_DAYS):
            cycle = days // self.CYCLE_DAYS
            infos.append(FrameInfo(
                date=self.REFERENCE + datetime.timedelta(days=days),
                platform="S1A" if cycle % 2 == 0 else "S1B",
                relative_orbit=relative_orbit,
                pass_direction=pass_direction,
                absolute_orbit=10_000 + cycle * 175 + relative_orbit,
            ))
        return infos

    def _truth(self, request: ExportRequest, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Stable footprint intensity at metric offsets (ys, xs) from center."""
        g = _footprint_rng(request.lat, request.lon, 1)
        wy1, wx1, wy2, wx2 = g.uniform(200.0, 800.0, 4)
        p1, p2, p3, p4 = g.uniform(0.0, 2.0 * np.pi, 4)
        a1, a2 = g.uniform(0.08, 0.18, 2)
        field = (0.6
                 + a1 * np.sin(2.0 * np.pi * ys / wy1 + p1)
                      * np.sin(2.0 * np.pi * xs / wx1 + p2)
                 + a2 * np.cos(2.0 * np.pi * ys / wy2 + p3)
                      * np.cos(2.0 * np.pi * xs / wx2 + p4))
        if request.polarization == "VH":
            field = 0.2 * field  # cross-pol backscatter sits well below co-pol
        return field

    def fetch(self, request: ExportRequest, info: FrameInfo) -> NativeFrame:
        n = request.grid_size
        m = n + 2  # one-pixel apron keeps bilinear sampling interior
        g = _footprint_rng(request.lat, request.lon, 2, info.date.toordinal(),
                           1 if request.polarization == "VH" else 0)
        jy, jx = g.uniform(-0.5, 0.5, 2)

        # native row r sits at common-grid coordinate r - 1 + jitter
        rows = np.arange(m, dtype=np.float64) - 1.0 + jy
        cols = np.arange(m, dtype=np.float64) - 1.0 + jx
        ys = (rows - (n - 1) / 2.0)[:, np.newaxis] * PIXEL_M
        xs = (cols - (n - 1) / 2.0)[np.newaxis, :] * PIXEL_M
        truth = self._truth(request, ys, xs)
        speckle = g.gamma(self.LOOKS, 1.0 / self.LOOKS, size=(m, m))
        data = (truth * speckle).astype(np.float32)[np.newaxis]
        return NativeFrame(data=data, offset_px=(1.0 - jy, 1.0 - jx))


class EarthEngineCatalog:
    """Live GRD FLOAT access through the earthengine-api package."""

    COLLECTION = "COPERNICUS/S1_GRD_FLOAT"

    def __init__(self):
        try:
            import ee
        except ImportError as exc:
            raise AuthError("earthengine-api is not installed; install "
                            "gee-export[ee] and authenticate first") from exc
        try:
            ee.Initialize()
        except Exception as exc:  # ee raises its own exception hierarchy
            raise AuthError(f"Earth Engine session is not authenticated: {exc}") from exc
        self._ee = ee

    def search(self, request: ExportRequest) -> list[FrameInfo]:
        ee = self._ee
        point = ee.Geometry.Point(request.lon, request.lat)
        day_after = (request.end + datetime.timedelta(days=1)).isoformat()
        col = (ee.ImageCollection(self.COLLECTION)
               .filterBounds(point.buffer(request.buffer_m))
               .filterDate(request.start.isoformat(), day_after)
               .filter(ee.Filter.listContains("transmitterReceiverPolarisation",
                                              request.polarization))
               .filter(ee.Filter.eq("instrumentMode", "IW"))
               .sort("system:time_start"))
        try:
            features = col.getInfo().get("features", [])
        except Exception as exc:
            raise CatalogError(f"catalog query failed: {exc}") from exc
        infos = []
        for feat in features:
            props = feat.get("properties", {})
            stamp = props.get("system:time_start", 0) / 1000.0
            when = datetime.datetime.fromtimestamp(stamp, datetime.timezone.utc)
            infos.append(FrameInfo(
                date=when.date(),
                platform="S1" + str(props.get("platform_number", "A")),
                relative_orbit=int(props.get("relativeOrbitNumber_start", 0)),
                pass_direction=str(props.get("orbitProperties_pass", "ASCENDING")),
                absolute_orbit=int(props.get("orbitNumber_start", 0)),
                asset_id=feat.get("id"),
            ))
        return infos

    def fetch(self, request: ExportRequest, info: FrameInfo) -> NativeFrame:
        ee = self._ee
        n = request.grid_size
        half = (n / 2.0 + 1.0) * PIXEL_M
        region = (ee.Geometry.Point(request.lon, request.lat)
                  .buffer(half).bounds())
        image = ee.Image(info.asset_id).select(request.polarization)
        try:
            patch = (image.reproject(crs=image.projection(), scale=PIXEL_M)
                     .sampleRectangle(region=region, defaultValue=0.0)
                     .getInfo())
            grid = np.asarray(patch["properties"][request.polarization],
                              dtype=np.float32)
        except Exception as exc:
            raise CatalogError(f"{info.asset_id}: download failed: {exc}") from exc
        if grid.ndim != 2 or min(grid.shape) < 2:
            raise CatalogError(f"{info.asset_id}: empty pixel window")
        # center the returned window on the common grid
        dy = (grid.shape[0] - n) / 2.0
        dx = (grid.shape[1] - n) / 2.0
        return NativeFrame(data=grid[np.newaxis], offset_px=(dy, dx))
