"""Residual despeckling model and its checkpoint container.

The network is a plain conv/BN/ReLU stack that predicts the noise
residual; a skip connection subtracts the residual from the input and a
sigmoid maps the result back into (0, 1):

    residual = CNN(x);  filtered = sigmoid(x - residual)

Default layout: conv3x3(P->64) + ReLU, 12 blocks of [conv3x3(64->64),
batch_norm, ReLU], then conv3x3(64->P).  With P = 1 that is 447,425
stored scalars (445,889 trainable plus the BN running statistics).

Checkpoints use a SARG-style binary container: magic "SARM", version
byte, dtype byte, a JSON header describing the layer chain and parameter
blocks, then the raw float32 blocks in header order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..speckle import stream_rng
from .layers import BatchNorm, Conv2D, ReLU

CKPT_MAGIC = b"SARM"
CKPT_VERSION = 1
CKPT_DTYPE_F32 = 1
_CKPT_HEADER = struct.Struct("<4sBBHI")

LAYER_KINDS = ("conv3x3", "batch_norm", "relu")


class CheckpointError(Exception):
    """Corrupt or incompatible checkpoint file."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int
    out_channels: int

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.kind != "conv3x3" and self.in_channels != self.out_channels:
            raise ValueError(f"{self.kind} cannot change channel count")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "in": self.in_channels, "out": self.out_channels}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(kind=d["kind"], in_channels=int(d["in"]), out_channels=int(d["out"]))


def default_layer_specs(channels: int = 1, width: int = 64,
                        blocks: int = 12) -> list[LayerSpec]:
    specs = [LayerSpec("conv3x3", channels, width), LayerSpec("relu", width, width)]
    for _ in range(blocks):
        specs += [LayerSpec("conv3x3", width, width),
                  LayerSpec("batch_norm", width, width),
                  LayerSpec("relu", width, width)]
    specs.append(LayerSpec("conv3x3", width, channels))
    return specs


class ResidualModel:
    """The residual CNN plus skip connection and sigmoid output."""

    def __init__(self, specs: list[LayerSpec] | None = None, seed: int = 0,
                 dtype=np.float32):
        self.specs = list(specs) if specs is not None else default_layer_specs()
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        rng = stream_rng(self.seed, 6)
        self.layers = []
        chain = self.specs[0].in_channels
        for spec in self.specs:
            if spec.in_channels != chain:
                raise ValueError(f"layer chain broken: {spec} fed {chain} channels")
            if spec.kind == "conv3x3":
                self.layers.append(Conv2D(spec.in_channels, spec.out_channels,
                                          rng=rng, dtype=self.dtype))
            elif spec.kind == "batch_norm":
                self.layers.append(BatchNorm(spec.out_channels, dtype=self.dtype))
            else:
                self.layers.append(ReLU())
            chain = spec.out_channels
        self.channels = chain
        if self.specs[0].in_channels != chain:
            raise ValueError("network must preserve the channel count end to end")
        self._sig = None

    @property
    def receptive_margin(self) -> int:
        """Context radius in pixels: one per 3x3 convolution."""
        return sum(1 for s in self.specs if s.kind == "conv3x3")

    def forward(self, x: np.ndarray, train: bool = False):
        """x (B, C, H, W) in [0, 1] -> (filtered, residual), same shape."""
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(f"expected (B, {self.channels}, H, W), got {x.shape}")
        if float(x.min()) < -1e-6 or float(x.max()) > 1.0 + 1e-6:
            raise ValueError("input must be normalized to [0, 1]")
        h = x
        for layer in self.layers:
            h = layer.forward(h, train)
        residual = h
        filtered = expit(x - residual)
        if train:
            self._sig = filtered
        return filtered, residual

    def backward(self, g_filtered: np.ndarray) -> np.ndarray:
        """Backprop from d(loss)/d(filtered); returns d(loss)/d(input).

        Parameter gradients are left on the layers for the optimizer.
        """
        if self._sig is None:
            raise RuntimeError("backward called before a train-mode forward")
        f = self._sig
        gz = (g_filtered * f * (1.0 - f)).astype(f.dtype, copy=False)
        g = -gz
        for layer in reversed(self.layers):
            g = layer.backward(g)
        self._sig = None
        return gz + g

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            out += [(f"layer{i:02d}.{n}", p) for n, p in layer.params()]
        return out

    def gradients(self):
        out = []
        for i, layer in enumerate(self.layers):
            out += [(f"layer{i:02d}.{n}", g) for n, g in layer.grads()]
        return out

    def state_blocks(self):
        """All stored arrays in a stable order: trainable then running stats
        per layer.  This is the serialization order."""
        out = []
        for i, layer in enumerate(self.layers):
            for n, p in list(layer.params()) + list(layer.state()):
                out.append((f"layer{i:02d}.{n}", p))
        return out

    @property
    def param_count(self) -> int:
        """Total stored scalars, running statistics included."""
        return sum(int(p.size) for _, p in self.state_blocks())


def save_checkpoint(model: ResidualModel, path, train_config: dict | None = None,
                    normalization: dict | None = None, clip_percentile: float = 90.0,
                    seed: int | None = None) -> None:
    blocks = model.state_blocks()
    header = {
        "layers": [s.to_dict() for s in model.specs],
        "param_count": model.param_count,
        "blocks": [{"name": n, "shape": list(p.shape)} for n, p in blocks],
        "train_config": train_config,
        "normalization": normalization,
        "clip_percentile": float(clip_percentile),
        "seed": model.seed if seed is None else int(seed),
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, CKPT_DTYPE_F32, 0, len(payload)))
        fh.write(payload)
        for _, p in blocks:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (model, header dict)."""
    with open(path, "rb") as fh:
        raw = fh.read(_CKPT_HEADER.size)
        if len(raw) < _CKPT_HEADER.size:
            raise CheckpointError(f"{path}: truncated header")
        magic, version, dtype, _reserved, hlen = _CKPT_HEADER.unpack(raw)
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        if version != CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        if dtype != CKPT_DTYPE_F32:
            raise CheckpointError(f"{path}: unsupported dtype code {dtype}")
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header ({exc})") from exc
        specs = [LayerSpec.from_dict(d) for d in header["layers"]]
        model = ResidualModel(specs, seed=int(header.get("seed", 0)))
        blocks = model.state_blocks()
        declared = header.get("blocks", [])
        if len(declared) != len(blocks):
            raise CheckpointError(f"{path}: expected {len(blocks)} blocks, header lists {len(declared)}")
        for (name, arr), meta in zip(blocks, declared):
            if meta["name"] != name or list(arr.shape) != list(meta["shape"]):
                raise CheckpointError(f"{path}: block mismatch at {name}")
            data = fh.read(4 * arr.size)
            if len(data) < 4 * arr.size:
                raise CheckpointError(f"{path}: truncated block {name}")
            arr[...] = np.frombuffer(data, dtype="<f4").reshape(arr.shape)
    if model.param_count != int(header["param_count"]):
        raise CheckpointError(f"{path}: parameter count mismatch")
    return model, header
