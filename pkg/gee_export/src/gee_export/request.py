"""Export request: footprint, date window, polarization, output grid."""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass

PIXEL_M = 10.0
MAX_BUFFER_M = 25_000.0  # keeps a single frame under ~100 MB

POLARIZATIONS = ("VV", "VH")


@dataclass(frozen=True)
class ExportRequest:
    """A square footprint of ``buffer_m`` meters half-width around
    (lat, lon), over the inclusive date window [start, end].

    ``out`` names the stack file; a ``.sarg`` suffix is optional and the
    sidecar lands next to it as ``<name>.meta.json``.
    """

    lat: float
    lon: float
    buffer_m: float
    start: datetime.date
    end: datetime.date
    out: str
    polarization: str = "VV"

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon {self.lon} outside [-180, 180]")
        if not self.buffer_m > 0.0:
            raise ValueError(f"buffer must be positive, got {self.buffer_m}")
        if self.buffer_m > MAX_BUFFER_M:
            raise ValueError(f"buffer {self.buffer_m} m exceeds the "
                             f"{MAX_BUFFER_M:.0f} m small-area limit")
        if self.start > self.end:
            raise ValueError(f"empty date range: {self.start} > {self.end}")
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be one of {POLARIZATIONS}, "
                             f"got {self.polarization!r}")

    @property
    def grid_size(self) -> int:
        """Output frames are square, ``grid_size`` pixels at 10 m."""
        return max(2, math.ceil(2.0 * self.buffer_m / PIXEL_M))
