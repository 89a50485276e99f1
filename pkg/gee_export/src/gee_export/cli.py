"""Command line entry point.

Exit codes: 0 success, 1 catalog or I/O failure, 2 invalid arguments,
3 no acquisitions in the window, 4 no authenticated session, 5 a fetch
failed mid-series.  The distinct codes let batch drivers retry partial
downloads but skip empty windows.
"""

from __future__ import annotations

import argparse
import datetime
import sys

from .catalog import (AuthError, CatalogError, EarthEngineCatalog,
                      EmptyResultError, PartialDownloadError, SyntheticCatalog)
from .export import export_stack
from .request import ExportRequest

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_EMPTY = 3
EXIT_AUTH = 4
EXIT_PARTIAL = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gee-export",
        description="Export a Sentinel-1 GRD intensity time series as a SARG stack")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="download one footprint's time series")
    p.add_argument("--lat", type=float, required=True, help="center latitude, degrees")
    p.add_argument("--lon", type=float, required=True, help="center longitude, degrees")
    p.add_argument("--buffer", type=float, required=True,
                   help="footprint half-width in meters")
    p.add_argument("--start", required=True, help="first date, ISO, inclusive")
    p.add_argument("--end", required=True, help="last date, ISO, inclusive")
    p.add_argument("--pol", default="VV", choices=("VV", "VH"))
    p.add_argument("--catalog", default="earthengine",
                   choices=("earthengine", "synthetic"),
                   help="synthetic simulates acquisitions, no network or auth")
    p.add_argument("--out", required=True,
                   help="stack path; '.sarg' appended when missing, sidecar "
                        "written as '<name>.meta.json'")
    return parser


def main(argv=None, catalog=None) -> int:
    """``catalog`` overrides backend selection, for embedding and tests."""
    try:
        args = build_parser().parse_args(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        request = ExportRequest(
            lat=args.lat, lon=args.lon, buffer_m=args.buffer,
            start=datetime.date.fromisoformat(args.start),
            end=datetime.date.fromisoformat(args.end),
            out=args.out, polarization=args.pol)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        if catalog is None:
            catalog = (SyntheticCatalog() if args.catalog == "synthetic"
                       else EarthEngineCatalog())
        result = export_stack(request, catalog)
    except AuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except PartialDownloadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (CatalogError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {result['stack']} ({result['frames']} frames, "
          f"{request.grid_size}x{request.grid_size} px) and {result['meta']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
