import json

import numpy as np
import pytest

from sard import dataset, sarg
from sard.dataset import SamplePair, SplitSpec, TimeSeriesStack
from sard.grid import ImageGrid
from sard.speckle import SpeckleConfig


class TestTemporalAverage:
    def test_matches_float64_mean(self, rng):
        frames = rng.random((5, 1, 6, 6), dtype=np.float32) * 3.0
        avg = dataset.temporal_average(TimeSeriesStack(frames=frames))
        expect = frames.astype(np.float64).mean(axis=0).astype(np.float32)
        assert np.array_equal(avg.data, expect)

    def test_variance_shrinks_with_length(self, rng):
        # averaging T unit-mean speckle frames divides the variance by T
        from sard import speckle
        t = 8
        frames = np.stack([
            speckle.sample_gamma_speckle(64, 64, 1, 1, seed=i).data
            for i in range(t)
        ])
        avg = dataset.temporal_average(TimeSeriesStack(frames=frames))
        v1 = frames[0].var()
        vt = avg.data.var()
        assert vt == pytest.approx(v1 / t, rel=0.35)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            TimeSeriesStack(frames=np.zeros((1, 4, 4), np.float32))


class TestSynthesizePair:
    def test_input_is_truth_times_field(self):
        truth = ImageGrid(np.full((8, 8), 2.0, np.float32))
        cfg = SpeckleConfig(model="gamma_intensity", looks=4, seed=3)
        pair = dataset.synthesize_pair(truth, cfg, stream=(0,))
        ratio = pair.input.data / truth.data
        assert ratio.mean() == pytest.approx(1.0, abs=0.2)
        assert pair.noise == cfg

    def test_rejects_negative_truth(self):
        truth = ImageGrid(np.array([[-0.1, 0.5]], dtype=np.float32))
        with pytest.raises(ValueError, match="nonnegative"):
            dataset.synthesize_pair(truth, SpeckleConfig())

    def test_pair_shape_mismatch_rejected(self, rng):
        a = ImageGrid(rng.random((1, 4, 4), dtype=np.float32))
        b = ImageGrid(rng.random((1, 4, 5), dtype=np.float32))
        with pytest.raises(ValueError):
            SamplePair(input=a, truth=b, noise=SpeckleConfig())


class TestSplit:
    def test_reference_size(self):
        train, val, test = dataset.split_dataset(2637, SplitSpec(seed=0))
        assert (len(train), len(val), len(test)) == (2000, 600, 37)

    def test_hundred_samples(self):
        train, val, test = dataset.split_dataset(100, SplitSpec(seed=0))
        assert (len(train), len(val), len(test)) == (76, 22, 2)

    @pytest.mark.parametrize("n", [21, 50, 200, 1000, 2637])
    def test_disjoint_and_exhaustive(self, n):
        train, val, test = dataset.split_dataset(n, SplitSpec(seed=5))
        union = set(train) | set(val) | set(test)
        assert len(train) + len(val) + len(test) == n
        assert union == set(range(n))

    def test_seed_determinism(self):
        a = dataset.split_dataset(100, SplitSpec(seed=1))
        b = dataset.split_dataset(100, SplitSpec(seed=1))
        c = dataset.split_dataset(100, SplitSpec(seed=2))
        assert a == b
        assert a != c

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=0.5, val_fraction=0.2, test_fraction=0.2)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            dataset.split_dataset(2, SplitSpec())


class TestAugment:
    def _pair(self, rng, h=6, w=6):
        truth = ImageGrid(rng.random((1, h, w), dtype=np.float32))
        return dataset.synthesize_pair(
            truth, SpeckleConfig(looks=4, seed=0), stream=(0,))

    def test_rotate_four_times_is_identity(self, rng):
        pair = self._pair(rng)
        out = dataset.augment(pair, [("rotate90", 1)] * 4
                              )
        assert np.array_equal(out.input.data, pair.input.data)
        assert np.array_equal(out.truth.data, pair.truth.data)

    def test_hflip_involution(self, rng):
        pair = self._pair(rng)
        out = dataset.augment(pair, [("hflip",), ("hflip",)])
        assert np.array_equal(out.truth.data, pair.truth.data)

    def test_same_ops_applied_to_both(self, rng):
        pair = self._pair(rng)
        out = dataset.augment(pair, [("rotate90", 1), ("hflip",)])
        ratio_before = pair.input.data / pair.truth.data
        ratio_after = out.input.data / out.truth.data
        # the speckle ratio undergoes the same geometry
        moved = dataset.augment(pair, [("rotate90", 1), ("hflip",)])
        assert np.allclose(np.sort(ratio_after, axis=None),
                           np.sort(ratio_before, axis=None), atol=1e-6)
        assert np.array_equal(moved.input.data, out.input.data)

    def test_crop_window(self, rng):
        pair = self._pair(rng, 8, 8)
        out = dataset.augment(pair, [("crop", 2, 1, 4)])
        assert out.truth.shape == (1, 4, 4)
        assert np.array_equal(out.truth.data[0], pair.truth.data[0, 1:5, 2:6])

    def test_crop_out_of_bounds(self, rng):
        pair = self._pair(rng, 8, 8)
        with pytest.raises(ValueError, match="bounds"):
            dataset.augment(pair, [("crop", 6, 6, 4)])

    def test_unknown_op(self, rng):
        with pytest.raises(ValueError, match="unknown augmentation"):
            dataset.augment(self._pair(rng), [("zoom", 2)])


class TestSyntheticTruth:
    def test_range_and_determinism(self):
        a = dataset.synthetic_truth(48, 32, 1, seed=4, stream=(0,))
        b = dataset.synthetic_truth(48, 32, 1, seed=4, stream=(0,))
        c = dataset.synthetic_truth(48, 32, 1, seed=4, stream=(1,))
        assert a.shape == (1, 32, 48)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)
        assert a.data.min() >= 0.05 - 1e-6 and a.data.max() <= 1.0 + 1e-6

    def test_smoother_than_white_noise(self):
        t = dataset.synthetic_truth(64, 64, 1, seed=4)
        diffs = np.abs(np.diff(t.data[0], axis=1)).mean()
        spread = t.data.std()
        # neighbor increments are small relative to global spread
        assert diffs < 0.2 * spread


class TestArchive:
    def test_round_trip(self, tmp_path, tiny_archive):
        back = dataset.read_archive(tiny_archive.path)
        assert back.normalization == tiny_archive.normalization
        assert back.splits == tiny_archive.splits
        assert len(back.pairs) == len(tiny_archive.pairs)
        for a, b in zip(back.pairs, tiny_archive.pairs):
            assert np.array_equal(a.input.data, b.input.data)
            assert np.array_equal(a.truth.data, b.truth.data)
            assert a.noise == b.noise

    def test_split_sizes(self, tiny_archive):
        sizes = {k: len(v) for k, v in tiny_archive.splits.items()}
        assert sizes == {"train": 16, "val": 4, "test": 1}

    def test_normalization_covers_all_pixels(self, tiny_archive):
        lo = min(min(p.input.data.min(), p.truth.data.min())
                 for p in tiny_archive.pairs)
        hi = max(max(p.input.data.max(), p.truth.data.max())
                 for p in tiny_archive.pairs)
        assert tiny_archive.normalization.min == pytest.approx(float(lo))
        assert tiny_archive.normalization.max == pytest.approx(float(hi))

    def test_inputs_are_clipped(self, tiny_archive):
        from sard.grid import clip_percentile
        for p in tiny_archive.pairs:
            reclipped = clip_percentile(p.input, tiny_archive.clip_p)
            assert np.array_equal(reclipped.data, p.input.data)

    def test_corrupt_sample_raises(self, tmp_path, tiny_archive):
        target = tmp_path / "arch" / "pair_00000_input.sarg"
        raw = target.read_bytes()
        target.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(sarg.SargError):
            dataset.read_archive(tiny_archive.path)

    def test_bad_manifest_raises(self, tmp_path):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "manifest.json").write_text("{not json")
        with pytest.raises(sarg.SargError, match="manifest"):
            dataset.read_archive(bad)

    def test_count_mismatch_raises(self, tmp_path, tiny_archive):
        mpath = tmp_path / "arch" / "manifest.json"
        manifest = json.loads(mpath.read_text())
        manifest["count"] = 99
        mpath.write_text(json.dumps(manifest))
        with pytest.raises(sarg.SargError, match="count"):
            dataset.read_archive(tiny_archive.path)

    def test_truth_fn_override(self, tmp_path):
        flat = ImageGrid(np.full((16, 16), 0.5, np.float32))
        arch = dataset.build_synthetic_archive(
            tmp_path / "flat", count=5, size=16, looks=4, seed=1,
            truth_fn=lambda i: flat)
        for p in arch.pairs:
            assert np.array_equal(p.truth.data, flat.data)

    def test_build_deterministic(self, tmp_path):
        a = dataset.build_synthetic_archive(tmp_path / "a", count=5, size=16,
                                            looks=4, seed=3)
        b = dataset.build_synthetic_archive(tmp_path / "b", count=5, size=16,
                                            looks=4, seed=3)
        for pa, pb in zip(a.pairs, b.pairs):
            assert np.array_equal(pa.input.data, pb.input.data)
