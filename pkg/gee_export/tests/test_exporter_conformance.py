"""Conformance against the despeckling toolkit, which is the consumer
of every export and therefore the oracle for the byte format: its
reader must accept the stack, and its temporal averaging must show the
expected speckle suppression over a stable footprint."""

import datetime

import numpy as np
import pytest

sard_dataset = pytest.importorskip("sard.dataset")
sard_metrics = pytest.importorskip("sard.metrics")
sard_sarg = pytest.importorskip("sard.sarg")

from gee_export import ExportRequest, SyntheticCatalog, export_stack


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def test_exported_stack_conforms(tmp_path):
    """The toolkit reads the export and temporal averaging raises ENL."""
    request = ExportRequest(
        lat=45.07, lon=7.69, buffer_m=250.0,
        start=datetime.date(2020, 1, 1), end=datetime.date(2020, 4, 1),
        out=str(tmp_path / "footprint"))
    result = export_stack(request, SyntheticCatalog())

    frames = sard_sarg.read_stack(result["stack"])  # validation oracle
    t, c, h, w = frames.shape
    shapes_ok = t == result["frames"] and t >= 2 and (c, h, w) == (1, 50, 50)

    stack = sard_dataset.TimeSeriesStack(frames)
    averaged = sard_dataset.temporal_average(stack)
    region = (10, 10, 30, 30)
    singles = [sard_metrics.enl(sard_dataset.ImageGrid(frames[i]), region)
               for i in range(t)]
    avg_enl = sard_metrics.enl(averaged, region)
    enl_ok = avg_enl > max(singles)

    ok = shapes_ok and enl_ok
    assert _check(
        "exporter conformance", ok,
        f"{t} frames read back as {frames.shape} {frames.dtype}; temporal "
        f"average ENL {avg_enl:.1f} vs best single frame {max(singles):.1f}")


def test_raw_power_units(tmp_path):
    """Exports carry linear intensity; a dB export would go negative."""
    request = ExportRequest(
        lat=45.07, lon=7.69, buffer_m=150.0,
        start=datetime.date(2020, 1, 1), end=datetime.date(2020, 2, 1),
        out=str(tmp_path / "units"))
    export_stack(request, SyntheticCatalog())
    frames = sard_sarg.read_stack(tmp_path / "units.sarg")
    assert frames.min() > 0.0
    skew = float(((frames - frames.mean()) ** 3).mean()) / float(frames.var()) ** 1.5
    assert skew > 0.0  # Gamma-speckled power is right-skewed; dB is not
