"""Supervised dataset construction and archive I/O.

Ground truth comes from temporal averaging of co-registered intensity
stacks (or a synthetic smooth-field generator at desk scale); noisy
inputs are synthesized by multiplying truth with a fresh speckle field.
Archives are directories of SARG files plus a ``manifest.json`` that
records split membership, noise configs, the clip percentile, and the
dataset-global normalization range.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import sarg
from .grid import ImageGrid, NormalizationParams, clip_percentile
from .speckle import SpeckleConfig, apply_noise, stream_rng

ARCHIVE_FORMAT = "sard-archive"
ARCHIVE_VERSION = 1

# Reference split: 2000 train / 600 val / 37 test out of 2637 samples,
# i.e. 75.8% / 22.8% / 1.4%.  Kept as exact ratios so the sizes above
# are reproduced exactly at N = 2637.
TRAIN_FRACTION = 2000.0 / 2637.0
VAL_FRACTION = 600.0 / 2637.0
TEST_FRACTION = 37.0 / 2637.0


@dataclass(frozen=True)
class TimeSeriesStack:
    """T co-registered frames over one footprint, as a (T, C, H, W) array."""

    frames: np.ndarray
    footprint: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[0] < 1:
            raise ValueError(f"expected nonempty (T, C, H, W) frames, got {self.frames.shape}")

    @property
    def length(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class SamplePair:
    """Speckled input and its clean truth, plus the noise that made it."""

    input: ImageGrid
    truth: ImageGrid
    noise: SpeckleConfig

    def __post_init__(self):
        if self.input.shape != self.truth.shape:
            raise ValueError(
                f"input/truth shape mismatch: {self.input.shape} vs {self.truth.shape}")


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test fractions plus the shuffle seed."""

    train_fraction: float = TRAIN_FRACTION
    val_fraction: float = VAL_FRACTION
    test_fraction: float = TEST_FRACTION
    seed: int = 0

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {total}")


def temporal_average(stack: TimeSeriesStack) -> ImageGrid:
    """Per-pixel arithmetic mean over the T frames, accumulated in float64."""
    if stack.length < 1:
        raise ValueError("empty stack")
    mean = stack.frames.astype(np.float64).mean(axis=0)
    return ImageGrid(mean.astype(np.float32))


def synthesize_pair(truth: ImageGrid, cfg: SpeckleConfig,
                    stream: tuple[int, ...] = ()) -> SamplePair:
    """input = truth x sampled field (or + Gaussian, per cfg)."""
    if (truth.data < 0).any():
        raise ValueError("truth must be nonnegative intensity data")
    noisy = apply_noise(truth, cfg, stream)
    return SamplePair(input=noisy, truth=truth, noise=cfg)


def split_dataset(pairs, spec: SplitSpec):
    """Partition sample indices into (train, val, test) lists.

    Sizes follow the reference arithmetic: the test share rounds up, the
    validation share rounds down, and train takes the remainder, which
    yields 2000/600/37 at N = 2637 and 76/22/2 at N = 100.  Shuffling is
    seed-deterministic; the three lists are disjoint and exhaustive.
    """
    n = pairs if isinstance(pairs, int) else len(pairs)
    if n < 3:
        raise ValueError(f"need at least 3 samples to split, got {n}")
    n_test = math.ceil(n * spec.test_fraction - 1e-9)
    n_val = math.floor(n * spec.val_fraction + 1e-9)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} samples leaves an empty partition")
    perm = stream_rng(spec.seed, 4).permutation(n)
    train = sorted(int(i) for i in perm[:n_train])
    val = sorted(int(i) for i in perm[n_train:n_train + n_val])
    test = sorted(int(i) for i in perm[n_train + n_val:])
    return train, val, test


def _transform_plane_stack(data: np.ndarray, op) -> np.ndarray:
    kind = op[0]
    if kind == "rotate90":
        return np.ascontiguousarray(np.rot90(data, k=int(op[1]), axes=(1, 2)))
    if kind == "hflip":
        return np.ascontiguousarray(data[:, :, ::-1])
    if kind == "crop":
        x, y, size = (int(v) for v in op[1:4])
        c, h, w = data.shape
        if x < 0 or y < 0 or x + size > w or y + size > h:
            raise ValueError(f"crop ({x},{y},{size}) outside {w}x{h} bounds")
        return np.ascontiguousarray(data[:, y:y + size, x:x + size])
    raise ValueError(f"unknown augmentation {kind!r}")


def augment(pair: SamplePair, ops) -> SamplePair:
    """Apply the same geometric ops to input and truth.

    Each op is a tuple: ("rotate90", k), ("hflip",) or ("crop", x, y, size).
    """
    inp, tru = pair.input.data, pair.truth.data
    for op in ops:
        inp = _transform_plane_stack(inp, op)
        tru = _transform_plane_stack(tru, op)
    return SamplePair(input=ImageGrid(inp), truth=ImageGrid(tru), noise=pair.noise)


def synthetic_truth(w: int, h: int, c: int, seed: int,
                    stream: tuple[int, ...] = ()) -> ImageGrid:
    """Smoothed random field in [0.05, 1], a stand-in for averaged scenes.

    White noise is low-passed with a per-sample correlation length and
    stretched to a strictly positive intensity range.  Half the samples
    are quantized into a few plateaus before a light final smoothing, so
    the family covers both gradual textures and the sharp field, water,
    and built-up boundaries that averaged scenes contain; the plateaus
    keep a mild internal texture the way real averaged regions do.
    """
    gen = stream_rng(seed, 5, *stream)
    sigma = gen.uniform(3.0, 9.0)
    field_ = np.empty((c, h, w), dtype=np.float64)
    for ch in range(c):
        field_[ch] = gaussian_filter(gen.standard_normal((h, w)), sigma=sigma, mode="reflect")
    if gen.random() < 0.5:
        k = int(gen.integers(2, 6))
        edge_sigma = gen.uniform(0.5, 1.0)
        amp = gen.uniform(0.06, 0.12)
        tex_sigma = gen.uniform(2.0, 5.0)
        for ch in range(c):
            z = field_[ch]
            cuts = np.quantile(z, np.linspace(0.0, 1.0, k + 1)[1:-1])
            levels = np.sort(gen.uniform(0.0, 1.0, size=k))
            tex = gaussian_filter(gen.standard_normal((h, w)), sigma=tex_sigma,
                                  mode="reflect")
            plate = levels[np.digitize(z, cuts)] + amp * tex / max(tex.std(), 1e-12)
            field_[ch] = gaussian_filter(plate, sigma=edge_sigma, mode="reflect")
    lo, hi = field_.min(), field_.max()
    z = (field_ - lo) / max(hi - lo, 1e-12)
    return ImageGrid((0.05 + 0.95 * z).astype(np.float32))


class Archive:
    """In-memory view of an on-disk pair archive."""

    def __init__(self, path, pairs, splits, normalization, manifest):
        self.path = path
        self.pairs = pairs
        self.splits = splits
        self.normalization = normalization
        self.manifest = manifest

    @property
    def clip_p(self) -> float:
        return float(self.manifest.get("clip_percentile", 90.0))

    def indices(self, split: str):
        return list(self.splits[split])

    def pairs_for(self, split: str):
        return [self.pairs[i] for i in self.splits[split]]


def write_archive(path, pairs, splits=None, seed: int = 0,
                  clip_p: float = 90.0) -> Archive:
    """Write pairs + manifest; returns the archive view.

    The dataset-global normalization range is computed here, over every
    input and truth pixel in the archive.
    """
    os.makedirs(path, exist_ok=True)
    if splits is None:
        splits = {"train": list(range(len(pairs))), "val": [], "test": []}
    split_of = {}
    for name, idxs in splits.items():
        for i in idxs:
            split_of[int(i)] = name

    samples = []
    lo, hi = np.inf, -np.inf
    for i, pair in enumerate(pairs):
        in_name = f"pair_{i:05d}_input.sarg"
        tr_name = f"pair_{i:05d}_truth.sarg"
        sarg.write_image(os.path.join(path, in_name), pair.input)
        sarg.write_image(os.path.join(path, tr_name), pair.truth)
        lo = min(lo, float(pair.input.data.min()), float(pair.truth.data.min()))
        hi = max(hi, float(pair.input.data.max()), float(pair.truth.data.max()))
        samples.append({
            "id": i,
            "input": in_name,
            "truth": tr_name,
            "split": split_of.get(i, "train"),
            "noise": pair.noise.to_dict(),
        })
    if not samples:
        lo, hi = 0.0, 0.0
    norm = NormalizationParams(min=lo, max=hi)
    manifest = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_VERSION,
        "seed": int(seed),
        "count": len(samples),
        "clip_percentile": float(clip_p),
        "normalization": norm.to_dict(),
        "samples": samples,
    }
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return Archive(path, list(pairs), {k: list(v) for k, v in splits.items()}, norm, manifest)


def read_archive(path) -> Archive:
    """Load an archive; raises SargError on corrupt entries."""
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise sarg.SargError(f"{manifest_path}: unreadable manifest ({exc})") from exc
    if manifest.get("format") != ARCHIVE_FORMAT or manifest.get("version") != ARCHIVE_VERSION:
        raise sarg.SargError(f"{manifest_path}: not a version-{ARCHIVE_VERSION} archive manifest")
    if manifest.get("count") != len(manifest.get("samples", [])):
        raise sarg.SargError(f"{manifest_path}: sample count does not match manifest entries")

    pairs = []
    splits = {"train": [], "val": [], "test": []}
    for entry in manifest["samples"]:
        inp = sarg.read_image(os.path.join(path, entry["input"]))
        tru = sarg.read_image(os.path.join(path, entry["truth"]))
        pairs.append(SamplePair(input=inp, truth=tru,
                                noise=SpeckleConfig.from_dict(entry["noise"])))
        splits.setdefault(entry["split"], []).append(int(entry["id"]))
    norm = NormalizationParams.from_dict(manifest["normalization"])
    return Archive(path, pairs, splits, norm, manifest)


def build_synthetic_archive(path, count: int, size: int = 96, channels: int = 1,
                            looks: int = 4, seed: int = 0, clip_p: float = 90.0,
                            split_spec: SplitSpec | None = None,
                            truth_fn=None) -> Archive:
    """Generate truths, speckle them, split, and write an archive.

    ``truth_fn(index) -> ImageGrid`` overrides the smooth-field generator
    (used for constant or edge-heavy evaluation scenes).
    """
    if count < 3:
        raise ValueError(f"need at least 3 samples, got {count}")
    spec = split_spec or SplitSpec(seed=seed)
    pairs = []
    for i in range(count):
        truth = truth_fn(i) if truth_fn is not None else synthetic_truth(
            size, size, channels, seed, (i,))
        cfg = SpeckleConfig(model="gamma_intensity", looks=looks, seed=seed)
        pair = synthesize_pair(truth, cfg, stream=(i,))
        pairs.append(SamplePair(input=clip_percentile(pair.input, clip_p),
                                truth=pair.truth, noise=pair.noise))
    train, val, test = split_dataset(len(pairs), spec)
    return write_archive(path, pairs, {"train": train, "val": val, "test": test},
                         seed=seed, clip_p=clip_p)
