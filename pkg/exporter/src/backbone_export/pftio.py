"""Minimal writer/reader for the ".pft" tensor container.

Deliberately independent of the consumer library: this module talks to the
on-disk format only (magic "PFT1" | u32 ndim | ndim x u64 dims | row-major
little-endian float32 payload), so the two codebases validate each other
through the files alone.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PFT1"


def write_pft(arr: np.ndarray, path) -> None:
    a = np.ascontiguousarray(arr, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", a.ndim))
        f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        f.write(a.tobytes(order="C"))


def read_pft(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a PFT1 tensor file")
    (ndim,) = struct.unpack_from("<I", blob, 4)
    shape = struct.unpack_from(f"<{ndim}Q", blob, 8)
    offset = 8 + 8 * ndim
    n = int(np.prod(shape))
    if len(blob) != offset + 4 * n:
        raise ValueError(f"{path}: payload size does not match header {shape}")
    return np.frombuffer(blob, dtype="<f4", count=n, offset=offset).reshape(shape).copy()
