"""Sentinel-1 GRD time-series exporter.

Queries a catalog backend for every intensity acquisition over a small
footprint, resamples the frames onto one 10 m pixel grid, and writes a
SARG stack plus a JSON sidecar with the footprint, acquisition dates,
polarization, and per-frame orbit metadata.  The live backend talks to
the Earth Engine GRD FLOAT collection; a synthetic backend serves tests
and offline demos.
"""

from .catalog import (AuthError, CatalogError, EmptyResultError,
                      PartialDownloadError, SyntheticCatalog)
from .export import export_stack
from .request import ExportRequest

__version__ = "0.1.0"

__all__ = [
    "AuthError",
    "CatalogError",
    "EmptyResultError",
    "ExportRequest",
    "PartialDownloadError",
    "SyntheticCatalog",
    "export_stack",
    "__version__",
]
