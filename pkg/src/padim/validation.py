"""Input validation helpers used across the package."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_f32(arr, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Coerce to a C-contiguous float32 ndarray, optionally checking rank."""
    out = np.ascontiguousarray(arr, dtype=np.float32)
    if ndim is not None and out.ndim != ndim:
        raise DataError(f"{name}: expected {ndim}-d array, got shape {out.shape}")
    return out


def check_activation_set(acts, batched: bool = False) -> list[np.ndarray]:
    """Validate a per-image (or per-batch) list of activation maps.

    Each entry must be [C, H, W] (or [B, C, H, W] when batched); spatial
    resolutions must be non-increasing from the first tap, and batch sizes
    must agree across taps.
    """
    if not acts:
        raise DataError("activation set is empty")
    expect_ndim = 4 if batched else 3
    out = []
    for k, a in enumerate(acts):
        a = np.asarray(a, dtype=np.float32)
        if a.ndim != expect_ndim:
            raise DataError(
                f"tap {k}: expected {expect_ndim}-d activation array, got shape {a.shape}"
            )
        out.append(a)
    if batched:
        batches = {a.shape[0] for a in out}
        if len(batches) != 1:
            raise DataError(f"inconsistent batch sizes across taps: {sorted(batches)}")
    h0, w0 = out[0].shape[-2:]
    for k, a in enumerate(out[1:], start=1):
        h, w = a.shape[-2:]
        if h > h0 or w > w0:
            raise DataError(
                f"tap {k} has higher resolution ({h}x{w}) than the first tap ({h0}x{w0})"
            )
    return out


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DataError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def check_binary_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DataError("labels must be a non-empty 1-d sequence")
    uniq = set(np.unique(labels).tolist())
    if not uniq <= {0, 1}:
        raise DataError(f"labels must be 0/1, got values {sorted(uniq)}")
    return labels.astype(np.int64)


def check_fitted(obj, attr: str) -> None:
    if getattr(obj, attr, None) is None:
        raise DataError(
            f"{type(obj).__name__} is not fitted yet; call fit() before using this method"
        )
