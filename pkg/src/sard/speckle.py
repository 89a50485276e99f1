"""Speckle and noise generators.

Intensity speckle follows the fully developed multiplicative model: the
field S is Gamma distributed with shape L and scale 1/L, so E[S] = 1 and
Var[S] = 1/L.  Amplitude speckle is the square root of the same variate
(Nakagami, Rayleigh at L = 1).  An additive clamped Gaussian covers the
photographic-noise experiments.

All sampling goes through a Philox counter-based generator keyed by a
64-bit seed plus an integer stream tag, so streams are reproducible
bit-for-bit across platforms and may be drawn in parallel per block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ImageGrid

MODELS = ("gamma_intensity", "nakagami_amplitude", "gaussian_additive")


@dataclass(frozen=True)
class SpeckleConfig:
    """Noise model selector plus its parameters and seed."""

    model: str = "gamma_intensity"
    looks: int = 4
    gauss_mean: float = 0.0
    gauss_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown noise model {self.model!r}, expected one of {MODELS}")
        if self.model != "gaussian_additive" and self.looks < 1:
            raise ValueError(f"looks must be a positive integer, got {self.looks}")
        if self.gauss_std < 0:
            raise ValueError("gauss_std must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "looks": int(self.looks),
            "gauss_mean": float(self.gauss_mean),
            "gauss_std": float(self.gauss_std),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeckleConfig":
        return cls(
            model=d.get("model", "gamma_intensity"),
            looks=int(d.get("looks", 4)),
            gauss_mean=float(d.get("gauss_mean", 0.0)),
            gauss_std=float(d.get("gauss_std", 0.0)),
            seed=int(d.get("seed", 0)),
        )


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic Philox generator for (seed, stream...).

    Philox is counter-based with a published algorithm, so the same key
    yields the same stream on every platform and numpy build.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def sample_gamma_speckle(w: int, h: int, c: int, looks: int, seed: int,
                         stream: tuple[int, ...] = ()) -> ImageGrid:
    """Unit-mean intensity speckle field, i.i.d. Gamma(L, 1/L).

    pdf f(S) = L^L S^(L-1) e^(-L S) / Gamma(L); mean 1, variance 1/L.
    """
    if looks < 1:
        raise ValueError(f"looks must be >= 1, got {looks}")
    gen = stream_rng(seed, 1, *stream)
    field_ = gen.gamma(shape=float(looks), scale=1.0 / looks, size=(c, h, w))
    return ImageGrid(field_.astype(np.float32))


def sample_nakagami_speckle(w: int, h: int, c: int, looks: int, seed: int,
                            stream: tuple[int, ...] = ()) -> ImageGrid:
    """Amplitude speckle field, s = sqrt(Gamma(L, 1/L)), so E[s^2] = 1.

    pdf f(s) = 2 L^L s^(2L-1) e^(-L s^2) / Gamma(L); Rayleigh at L = 1.
    """
    if looks < 1:
        raise ValueError(f"looks must be >= 1, got {looks}")
    gen = stream_rng(seed, 2, *stream)
    field_ = gen.gamma(shape=float(looks), scale=1.0 / looks, size=(c, h, w))
    return ImageGrid(np.sqrt(field_).astype(np.float32))


def apply_multiplicative(img: ImageGrid, field_: ImageGrid) -> ImageGrid:
    """Y = X * S, elementwise; shapes must match exactly."""
    if img.shape != field_.shape:
        raise ValueError(f"shape mismatch: image {img.shape} vs field {field_.shape}")
    return ImageGrid(img.data * field_.data)


def add_gaussian(img: ImageGrid, mean: float, std: float, seed: int,
                 stream: tuple[int, ...] = ()) -> ImageGrid:
    """y = clamp(x + n, 0, 1) with n ~ Normal(mean, std^2).

    Intended for display-normalized data; clamping keeps the result a
    valid input for the sigmoid-output model.
    """
    if std < 0:
        raise ValueError(f"std must be nonnegative, got {std}")
    gen = stream_rng(seed, 3, *stream)
    noise = gen.normal(loc=mean, scale=std, size=img.shape) if std > 0 else mean
    return ImageGrid(np.clip(img.data + noise, 0.0, 1.0).astype(np.float32))


def sample_field(cfg: SpeckleConfig, w: int, h: int, c: int,
                 stream: tuple[int, ...] = ()) -> ImageGrid:
    """Draw the multiplicative field described by ``cfg``.

    Only meaningful for the multiplicative models; the additive model has
    no standalone field and is applied directly by :func:`apply_noise`.
    """
    if cfg.model == "gamma_intensity":
        return sample_gamma_speckle(w, h, c, cfg.looks, cfg.seed, stream)
    if cfg.model == "nakagami_amplitude":
        return sample_nakagami_speckle(w, h, c, cfg.looks, cfg.seed, stream)
    raise ValueError(f"model {cfg.model!r} has no multiplicative field")


def apply_noise(img: ImageGrid, cfg: SpeckleConfig,
                stream: tuple[int, ...] = ()) -> ImageGrid:
    """Apply the configured noise model to an image."""
    if cfg.model == "gaussian_additive":
        return add_gaussian(img, cfg.gauss_mean, cfg.gauss_std, cfg.seed, stream)
    field_ = sample_field(cfg, img.width, img.height, img.channels, stream)
    return apply_multiplicative(img, field_)
