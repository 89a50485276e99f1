"""SARG stack writer.

The despeckling toolkit consumes exports through its file format, so
this module implements the published byte contract directly:

    bytes 0-3   magic ASCII "SARG"
    byte  4     format version, currently 1
    byte  5     dtype code, 1 = 32-bit IEEE-754
    bytes 6-7   reserved, zero
    4 x uint32  T, W, H, C (little-endian)
    payload     T*C*H*W float32 values, time-major, channel-planar, row-major

The toolkit's own reader is the conformance oracle for this writer.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SARG"
VERSION = 1
DTYPE_F32 = 1

_HEADER = struct.Struct("<4sBBHIIII")


def write_stack(path, frames: np.ndarray) -> None:
    """Write a (T, C, H, W) array as a float32 SARG stack."""
    arr = np.ascontiguousarray(frames, dtype=np.float32)
    if arr.ndim != 4:
        raise ValueError(f"expected (T, C, H, W) frames, got shape {arr.shape}")
    t, c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, t, w, h, c))
        fh.write(arr.astype("<f4", copy=False).tobytes())
