"""SARG raw-grid file format.

Layout (little-endian throughout):

    bytes 0-3   magic ASCII "SARG"
    byte  4     format version, currently 1
    byte  5     dtype code, 1 = 32-bit IEEE-754
    bytes 6-7   reserved, zero
    4 x uint32  T, W, H, C
    payload     T*C*H*W float32 values, time-major, channel-planar, row-major

T is 1 for single images.  The format is bit-exact: writing and reading
back yields identical bytes, which the determinism tests rely on.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import ImageGrid

MAGIC = b"SARG"
VERSION = 1
DTYPE_F32 = 1

_HEADER = struct.Struct("<4sBBHIIII")


class SargError(Exception):
    """Corrupt, truncated, or incompatible SARG file."""


def write_stack(path, frames: np.ndarray) -> None:
    """Write a (T, C, H, W) float32 array as a SARG stack."""
    arr = np.ascontiguousarray(frames, dtype=np.float32)
    if arr.ndim != 4:
        raise ValueError(f"expected (T, C, H, W) frames, got shape {arr.shape}")
    t, c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, t, w, h, c))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def read_stack(path) -> np.ndarray:
    """Read a SARG stack back as a (T, C, H, W) float32 array."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise SargError(f"{path}: truncated header")
        magic, version, dtype, _reserved, t, w, h, c = _HEADER.unpack(header)
        if magic != MAGIC:
            raise SargError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise SargError(f"{path}: unsupported version {version}")
        if dtype != DTYPE_F32:
            raise SargError(f"{path}: unsupported dtype code {dtype}")
        count = t * c * h * w
        payload = fh.read(4 * count)
        if len(payload) < 4 * count:
            raise SargError(f"{path}: truncated payload, "
                            f"expected {4 * count} bytes, got {len(payload)}")
        data = np.frombuffer(payload, dtype="<f4", count=count)
    return data.reshape(t, c, h, w).astype(np.float32)


def write_image(path, img: ImageGrid) -> None:
    """Write a single image as a T=1 stack."""
    write_stack(path, img.data[np.newaxis])


def read_image(path) -> ImageGrid:
    """Read a T=1 SARG file as an image; rejects longer stacks."""
    frames = read_stack(path)
    if frames.shape[0] != 1:
        raise SargError(f"{path}: expected a single frame, found T={frames.shape[0]}")
    return ImageGrid(frames[0])
