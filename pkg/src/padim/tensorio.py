"""Bit-exact binary tensor container (".pft" files).

Layout: magic ``PFT1`` (4 bytes) | u32 ndim | ndim x u64 dims | payload of
little-endian float32, row-major. All header integers are little-endian.
No padding, no compression. Every dimension must be >= 1 and the payload
length must equal ``4 * prod(dims)`` exactly; trailing bytes are an error.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"PFT1"

# Guards against garbage headers; no real tensor in this pipeline comes close.
_MAX_NDIM = 32
_MAX_ELEMENTS = 1 << 40


def write_tensor(arr, path) -> None:
    """Write an array as a ``.pft`` file; round-trips bit-exactly via read_tensor."""
    a = np.ascontiguousarray(arr, dtype=np.float32)
    if a.ndim == 0:
        a = a.reshape(1)
    if any(d < 1 for d in a.shape):
        raise DataError(f"cannot write tensor with empty dimension: shape {a.shape}")
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", a.ndim))
            f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            f.write(a.tobytes(order="C"))
    except OSError as e:
        raise DataError(f"cannot write tensor file {path}: {e}") from e


def read_tensor(path) -> np.ndarray:
    """Read a ``.pft`` file into a float32 ndarray.

    Raises DataError on bad magic, malformed shape headers, payload length
    mismatch, or trailing bytes.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read tensor file {path}: {e}") from e

    if len(blob) < 8:
        raise DataError(f"{path}: truncated header")
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: bad magic / version (expected {MAGIC!r})")
    (ndim,) = struct.unpack_from("<I", blob, 4)
    if not 1 <= ndim <= _MAX_NDIM:
        raise DataError(f"{path}: invalid ndim {ndim}")
    header_end = 8 + 8 * ndim
    if len(blob) < header_end:
        raise DataError(f"{path}: truncated shape header")
    shape = struct.unpack_from(f"<{ndim}Q", blob, 8)
    if any(d < 1 for d in shape):
        raise DataError(f"{path}: invalid shape entry in {shape}")
    n = 1
    for d in shape:
        n *= d
        if n > _MAX_ELEMENTS:
            raise DataError(f"{path}: implausible element count in shape {shape}")
    payload = blob[header_end:]
    if len(payload) < 4 * n:
        raise DataError(
            f"{path}: payload length mismatch (expected {4 * n} bytes, got {len(payload)})"
        )
    if len(payload) > 4 * n:
        raise DataError(f"{path}: trailing bytes after payload")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
