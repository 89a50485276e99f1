import datetime
import json

import numpy as np
import pytest

from gee_export.catalog import (CatalogError, EmptyResultError, NativeFrame,
                                PartialDownloadError, SyntheticCatalog)
from gee_export.export import _resample, export_stack
from gee_export.request import ExportRequest


def _request(tmp_path, **kw):
    args = dict(lat=45.07, lon=7.69, buffer_m=250.0,
                start=datetime.date(2020, 1, 1), end=datetime.date(2020, 3, 1),
                out=str(tmp_path / "stack"))
    args.update(kw)
    return ExportRequest(**args)


class TestRequest:
    def test_valid_request_and_grid(self, tmp_path):
        req = _request(tmp_path)
        assert req.grid_size == 50  # 2 * 250 m at 10 m pixels

    @pytest.mark.parametrize("bad", [
        {"lat": 91.0}, {"lat": -90.5}, {"lon": 181.0},
        {"buffer_m": 0.0}, {"buffer_m": -10.0}, {"buffer_m": 30_000.0},
        {"polarization": "HH"}, {"polarization": "vv"},
        {"start": datetime.date(2020, 3, 2)},  # after end
    ])
    def test_invalid_fields_rejected(self, tmp_path, bad):
        with pytest.raises(ValueError):
            _request(tmp_path, **bad)

    def test_single_day_range_is_nonempty(self, tmp_path):
        day = datetime.date(2020, 1, 7)
        req = _request(tmp_path, start=day, end=day)
        assert req.start == req.end

    def test_grid_size_rounds_up(self, tmp_path):
        assert _request(tmp_path, buffer_m=14.9).grid_size == 3
        assert _request(tmp_path, buffer_m=5.0).grid_size == 2


class TestSyntheticCatalog:
    def test_search_is_deterministic(self, tmp_path):
        req = _request(tmp_path)
        cat = SyntheticCatalog()
        assert cat.search(req) == cat.search(req)

    def test_search_respects_window_and_cadence(self, tmp_path):
        req = _request(tmp_path)
        infos = SyntheticCatalog().search(req)
        assert len(infos) >= 2
        dates = [i.date for i in infos]
        assert all(req.start <= d <= req.end for d in dates)
        assert dates == sorted(dates)
        gaps = {(b - a).days for a, b in zip(dates, dates[1:])}
        assert gaps == {SyntheticCatalog.CYCLE_DAYS}

    def test_search_between_passes_is_empty(self, tmp_path):
        cat = SyntheticCatalog()
        wide = cat.search(_request(tmp_path))
        a, b = wide[0].date, wide[1].date
        gap = _request(tmp_path, start=a + datetime.timedelta(days=1),
                       end=b - datetime.timedelta(days=1))
        assert cat.search(gap) == []

    def test_fetch_is_deterministic_raw_power(self, tmp_path):
        req = _request(tmp_path)
        cat = SyntheticCatalog()
        info = cat.search(req)[0]
        one = cat.fetch(req, info)
        two = cat.fetch(req, info)
        assert np.array_equal(one.data, two.data)
        assert one.offset_px == two.offset_px
        # linear power: strictly positive, right-skewed, never log-scaled
        assert one.data.min() > 0.0
        assert one.data.mean() < np.square(one.data).mean() ** 0.5

    def test_cross_pol_sits_below_co_pol(self, tmp_path):
        cat = SyntheticCatalog()
        vv_req = _request(tmp_path, polarization="VV")
        vh_req = _request(tmp_path, polarization="VH")
        vv = cat.fetch(vv_req, cat.search(vv_req)[0])
        vh = cat.fetch(vh_req, cat.search(vh_req)[0])
        assert vh.data.mean() < 0.5 * vv.data.mean()


class TestResample:
    def test_constant_frame_stays_constant(self):
        frame = NativeFrame(data=np.full((1, 12, 12), 0.7, np.float32),
                            offset_px=(1.3, 0.6))
        out = _resample(frame, 10)
        assert out.shape == (1, 10, 10)
        assert np.allclose(out, 0.7, atol=1e-7)

    def test_bilinear_reproduces_linear_ramp(self):
        # bilinear interpolation is exact on affine intensity fields
        r, c = np.mgrid[0:12, 0:12].astype(np.float64)
        frame = NativeFrame(data=(2.0 + 0.25 * r + 0.5 * c)[np.newaxis],
                            offset_px=(1.25, 0.75))
        out = _resample(frame, 10)
        i, j = np.mgrid[0:10, 0:10].astype(np.float64)
        expect = 2.0 + 0.25 * (i + 1.25) + 0.5 * (j + 0.75)
        assert np.allclose(out[0], expect, atol=1e-6)


class _FlakyCatalog:
    """Delegates to the synthetic backend, fails the chosen fetch."""

    def __init__(self, fail_at: int):
        self.inner = SyntheticCatalog()
        self.fail_at = fail_at
        self.calls = 0

    def search(self, request):
        return self.inner.search(request)

    def fetch(self, request, info):
        self.calls += 1
        if self.calls == self.fail_at:
            raise CatalogError("simulated transfer abort")
        return self.inner.fetch(request, info)


class TestExport:
    def test_writes_stack_and_sidecar(self, tmp_path):
        req = _request(tmp_path)
        result = export_stack(req, SyntheticCatalog())
        assert result["frames"] >= 2
        meta = json.loads((tmp_path / "stack.meta.json").read_text())
        assert meta["dates"] == sorted(meta["dates"])
        assert len(meta["frames"]) == result["frames"]
        assert meta["polarization"] == "VV"
        assert meta["grid"] == {"width": 50, "height": 50, "pixel_m": 10.0}
        assert meta["footprint"]["buffer_m"] == 250.0
        assert {"date", "platform", "relative_orbit", "pass", "absolute_orbit"} \
            <= set(meta["frames"][0])

    def test_out_suffix_is_optional(self, tmp_path):
        req = _request(tmp_path, out=str(tmp_path / "named.sarg"))
        result = export_stack(req, SyntheticCatalog())
        assert result["stack"].endswith("named.sarg")
        assert result["meta"].endswith("named.meta.json")

    def test_export_is_reproducible(self, tmp_path):
        a = _request(tmp_path, out=str(tmp_path / "one"))
        b = _request(tmp_path, out=str(tmp_path / "two"))
        export_stack(a, SyntheticCatalog())
        export_stack(b, SyntheticCatalog())
        assert (tmp_path / "one.sarg").read_bytes() == (tmp_path / "two.sarg").read_bytes()

    def test_empty_window_writes_nothing(self, tmp_path):
        cat = SyntheticCatalog()
        wide = cat.search(_request(tmp_path))
        gap_start = wide[0].date + datetime.timedelta(days=1)
        req = _request(tmp_path, start=gap_start,
                       end=gap_start + datetime.timedelta(days=3))
        with pytest.raises(EmptyResultError):
            export_stack(req, cat)
        assert list(tmp_path.iterdir()) == []

    def test_partial_download_writes_nothing(self, tmp_path):
        req = _request(tmp_path)
        with pytest.raises(PartialDownloadError, match="fetched 1 of"):
            export_stack(req, _FlakyCatalog(fail_at=2))
        assert list(tmp_path.iterdir()) == []
