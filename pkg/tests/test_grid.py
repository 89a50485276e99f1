import numpy as np
import pytest
from PIL import Image

from sard import grid
from sard.grid import ImageGrid, NormalizationParams


class TestImageGrid:
    def test_two_dim_input_promoted_to_single_channel(self):
        g = ImageGrid(np.zeros((4, 5), dtype=np.float32))
        assert g.shape == (1, 4, 5)
        assert g.channels == 1 and g.height == 4 and g.width == 5

    def test_data_is_frozen(self, small_grid):
        with pytest.raises(ValueError):
            small_grid.data[0, 0, 0] = 1.0

    def test_rejects_bad_rank_and_empty(self):
        with pytest.raises(ValueError):
            ImageGrid(np.zeros(4, dtype=np.float32))
        with pytest.raises(ValueError):
            ImageGrid(np.zeros((1, 0, 5), dtype=np.float32))

    def test_plane_is_view(self, small_grid):
        assert small_grid.plane(0).base is small_grid.data


class TestNormalizationParams:
    def test_round_trip_dict(self):
        p = NormalizationParams(min=0.25, max=3.5)
        assert NormalizationParams.from_dict(p.to_dict()) == p

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            NormalizationParams(min=2.0, max=1.0)

    def test_degenerate_range_allowed(self):
        # constant image: max == min is legal, epsilon keeps division finite
        p = NormalizationParams(min=1.0, max=1.0)
        g = grid.normalize(ImageGrid(np.full((2, 2), 1.0, np.float32)), p)
        assert np.all(g.data == 0.0)


class TestPercentile:
    def test_nearest_rank_1_to_100(self):
        # 1..100 at p=90 selects exactly the value 90
        vals = np.arange(1, 101, dtype=np.float32)
        assert grid.percentile_value(vals, 90.0) == 90.0

    def test_small_sample_ranks(self):
        vals = np.array([10.0, 20.0, 30.0, 40.0], dtype=np.float32)
        # ceil(.9*4)=4 -> 40; ceil(.5*4)=2 -> 20; ceil(.25*4)=1 -> 10
        assert grid.percentile_value(vals, 90.0) == 40.0
        assert grid.percentile_value(vals, 50.0) == 20.0
        assert grid.percentile_value(vals, 25.0) == 10.0
        assert grid.percentile_value(vals, 100.0) == 40.0

    def test_rejects_out_of_range_p(self):
        vals = np.ones(3, dtype=np.float32)
        for p in (0.0, -1.0, 101.0):
            with pytest.raises(ValueError):
                grid.percentile_value(vals, p)


class TestClipPercentile:
    def test_caps_upper_tail_only(self):
        vals = np.arange(1, 101, dtype=np.float32).reshape(10, 10)
        clipped = grid.clip_percentile(ImageGrid(vals), 90.0)
        assert clipped.data.max() == 90.0
        assert clipped.data.min() == 1.0
        # below the cap nothing moves
        below = vals <= 90.0
        assert np.array_equal(clipped.data[0][below], vals[below])

    def test_channels_clipped_independently(self):
        a = np.arange(1, 101, dtype=np.float32).reshape(10, 10)
        img = ImageGrid(np.stack([a, 10.0 * a]))
        clipped = grid.clip_percentile(img, 90.0)
        assert clipped.data[0].max() == 90.0
        assert clipped.data[1].max() == 900.0

    def test_rejects_non_finite(self):
        bad = np.ones((3, 3), dtype=np.float32)
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            grid.clip_percentile(ImageGrid(bad), 90.0)

    def test_idempotent(self, rng):
        img = ImageGrid(rng.random((2, 16, 16), dtype=np.float32))
        once = grid.clip_percentile(img, 90.0)
        twice = grid.clip_percentile(once, 90.0)
        assert np.array_equal(once.data, twice.data)


class TestNormalize:
    def test_maps_min_max_to_unit_range(self):
        p = NormalizationParams(min=2.0, max=6.0, epsilon=1e-6)
        img = ImageGrid(np.array([[2.0, 6.0]], dtype=np.float32))
        out = grid.normalize(img, p)
        assert out.data[0, 0, 0] == 0.0
        assert out.data[0, 0, 1] == pytest.approx(4.0 / (4.0 + 1e-6), rel=1e-6)
        assert out.data[0, 0, 1] <= 1.0

    def test_denormalize_inverts(self, rng):
        p = NormalizationParams(min=0.5, max=4.5)
        img = ImageGrid((rng.random((1, 8, 8), dtype=np.float32) * 4.0 + 0.5))
        back = grid.denormalize(grid.normalize(img, p), p)
        np.testing.assert_allclose(back.data, img.data, atol=1e-5)


class TestSobel:
    def test_constant_image_zero_gradient(self):
        g = grid.sobel_gradient(ImageGrid(np.full((8, 8), 0.7, np.float32)))
        assert np.all(g.data == 0.0)

    def test_horizontal_ramp_magnitude(self):
        # f(x,y) = x: Hx response is 8 everywhere (edge replication keeps
        # the border consistent), Hy response is 0.
        x = np.tile(np.arange(8, dtype=np.float32), (8, 1))
        g = grid.sobel_gradient(ImageGrid(x))
        inner = g.data[0, 1:-1, 1:-1]
        np.testing.assert_allclose(inner, 8.0, atol=1e-6)

    def test_step_edge_peaks_at_edge(self):
        step = np.zeros((9, 9), dtype=np.float32)
        step[:, 5:] = 1.0
        g = grid.sobel_gradient(ImageGrid(step)).plane(0)
        assert g[4, 4] > 0 and g[4, 5] > 0
        assert g[4, 1] == 0.0

    def test_rejects_multichannel(self):
        with pytest.raises(ValueError):
            grid.sobel_gradient(ImageGrid(np.zeros((2, 4, 4), np.float32)))


class TestHistogram:
    def test_counts_conserved_with_outliers(self):
        img = ImageGrid(np.array([[-5.0, 0.5, 0.5, 99.0]], dtype=np.float32))
        counts = grid.histogram(img, bins=4, value_range=(0.0, 1.0))
        assert counts.sum() == 4
        assert counts[0] == 1 and counts[-1] == 1

    def test_uniform_fill(self):
        img = ImageGrid(np.linspace(0.0, 1.0, 400, dtype=np.float32).reshape(20, 20))
        counts = grid.histogram(img, bins=4, value_range=(0.0, 1.0))
        assert counts.sum() == 400
        assert counts.min() >= 99

    def test_rejects_bad_args(self, small_grid):
        with pytest.raises(ValueError):
            grid.histogram(small_grid, bins=0, value_range=(0, 1))
        with pytest.raises(ValueError):
            grid.histogram(small_grid, bins=4, value_range=(1, 1))


class TestPng:
    def test_single_channel_round_values(self, tmp_path):
        img = ImageGrid(np.array([[0.0, 0.5, 1.0]], dtype=np.float32))
        path = tmp_path / "g.png"
        grid.to_png(img, path)
        px = np.asarray(Image.open(path))
        assert px.tolist() == [[0, 128, 255]]

    def test_stretch_window(self, tmp_path):
        img = ImageGrid(np.array([[1.0, 3.0]], dtype=np.float32))
        path = tmp_path / "g.png"
        grid.to_png(img, path, stretch=(1.0, 3.0))
        px = np.asarray(Image.open(path))
        assert px.tolist() == [[0, 255]]

    def test_rgb(self, tmp_path, rng):
        img = ImageGrid(rng.random((3, 4, 4), dtype=np.float32))
        path = tmp_path / "rgb.png"
        grid.to_png(img, path)
        assert Image.open(path).mode == "RGB"
