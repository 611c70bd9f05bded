"""Patch embedding grids and dimensionality reduction.

An embedding grid stacks, for every position of the finest activation map,
the activation vectors of all taps at the spatially corresponding location.
Coarser taps are aligned by nearest-neighbor index replication
(floor(i * H_l / H), floor(j * W_l / W)); feature values are never
interpolated, so blocks of neighboring positions share the coarse part of
their embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .validation import check_activation_set


def _tap_index(n_out: int, n_in: int) -> np.ndarray:
    return (np.arange(n_out, dtype=np.int64) * n_in) // n_out


def build_embeddings(acts) -> np.ndarray:
    """Concatenate tap activations into per-position embedding vectors.

    acts: list of [C_l, H_l, W_l] arrays for one image, or [B, C_l, H_l, W_l]
    for a batch, ordered from finest to coarsest. Returns [D, H, W] (or
    [B, D, H, W]) with D = sum of tap channel counts and H, W taken from the
    first tap.
    """
    if not acts:
        raise DataError("activation set is empty")
    batched = np.asarray(acts[0]).ndim == 4
    taps = check_activation_set(acts, batched=batched)
    h0, w0 = taps[0].shape[-2:]
    parts = []
    for tap in taps:
        h, w = tap.shape[-2:]
        if (h, w) == (h0, w0):
            parts.append(tap)
            continue
        rows = _tap_index(h0, h)
        cols = _tap_index(w0, w)
        parts.append(tap[..., rows[:, None], cols[None, :]])
    return np.concatenate(parts, axis=-3)


@dataclass
class ReductionSpec:
    """Dimensionality reduction applied to embedding vectors before fitting.

    kind 'none' passes vectors through, 'random' gathers a fixed random
    subset of coordinates, 'pca' projects mean-centered vectors onto the
    top principal directions of the pooled training embeddings.
    """

    kind: str = "none"
    d_full: int = 0
    d_prime: int = 0
    seed: int = 0
    indices: np.ndarray | None = None
    projection: np.ndarray | None = None
    mean: np.ndarray | None = None
    captured_variance: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "random", "pca"):
            raise DataError(f"unknown reduction kind {self.kind!r}")

    @property
    def output_dim(self) -> int:
        return self.d_full if self.kind == "none" else self.d_prime

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "d_full": int(self.d_full),
             "d_prime": int(self.d_prime), "seed": int(self.seed)}
        if self.indices is not None:
            d["indices"] = [int(i) for i in self.indices]
        if self.projection is not None:
            d["projection"] = self.projection.astype(np.float64).tolist()
            d["mean"] = self.mean.astype(np.float64).tolist()
        if self.captured_variance is not None:
            d["captured_variance"] = float(self.captured_variance)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReductionSpec":
        return cls(
            kind=d["kind"],
            d_full=int(d["d_full"]),
            d_prime=int(d["d_prime"]),
            seed=int(d.get("seed", 0)),
            indices=None if "indices" not in d else np.asarray(d["indices"], dtype=np.int64),
            projection=None if "projection" not in d else np.asarray(d["projection"], dtype=np.float64),
            mean=None if "mean" not in d else np.asarray(d["mean"], dtype=np.float64),
            captured_variance=d.get("captured_variance"),
        )


def identity_reduction(d_full: int) -> ReductionSpec:
    return ReductionSpec(kind="none", d_full=d_full, d_prime=d_full)


def make_random_reduction(d_full: int, d_prime: int, seed: int) -> ReductionSpec:
    """Uniform sample of d_prime coordinates without replacement, sorted ascending."""
    if not 1 <= d_prime <= d_full:
        raise DataError(f"d_prime must be in [1, {d_full}], got {d_prime}")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(d_full, size=d_prime, replace=False)).astype(np.int64)
    return ReductionSpec(kind="random", d_full=d_full, d_prime=d_prime,
                         seed=seed, indices=indices)


def fit_pca(vectors, d_prime: int) -> ReductionSpec:
    """PCA of pooled embedding vectors (pooled over positions and images).

    vectors: iterable of [n, D] chunks or a single [N, D] array. Rows of the
    projection are the top-d_prime eigenvectors of the pooled sample
    covariance; eigenvalues are clamped at 1e-12. The captured-variance
    ratio is stored on the returned spec.
    """
    if isinstance(vectors, np.ndarray):
        vectors = [vectors]
    n = 0
    s1 = None
    s2 = None
    for chunk in vectors:
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.ndim != 2:
            raise DataError(f"expected [n, D] vector chunks, got shape {chunk.shape}")
        if s1 is None:
            d_full = chunk.shape[1]
            s1 = np.zeros(d_full)
            s2 = np.zeros((d_full, d_full))
        elif chunk.shape[1] != s1.shape[0]:
            raise DataError("inconsistent vector dimension across chunks")
        n += chunk.shape[0]
        s1 += chunk.sum(axis=0)
        s2 += chunk.T @ chunk
    if s1 is None or n < max(2, d_prime):
        raise DataError(f"PCA needs at least max(2, d_prime) samples, got {n}")
    d_full = s1.shape[0]
    if not 1 <= d_prime <= d_full:
        raise DataError(f"d_prime must be in [1, {d_full}], got {d_prime}")
    mean = s1 / n
    cov = (s2 - n * np.outer(mean, mean)) / (n - 1)
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals[::-1], 1e-12, None)
    eigvecs = eigvecs[:, ::-1]
    # Fix eigenvector signs so repeated fits are reproducible.
    top = eigvecs[:, :d_prime].T.copy()
    for row in top:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    captured = float(eigvals[:d_prime].sum() / eigvals.sum())
    return ReductionSpec(kind="pca", d_full=d_full, d_prime=d_prime,
                         projection=top, mean=mean, captured_variance=captured)


def apply_reduction(grid: np.ndarray, spec: ReductionSpec) -> np.ndarray:
    """Reduce a [D, H, W] (or [B, D, H, W]) embedding grid per the spec."""
    if spec.kind == "none":
        return grid
    grid = np.asarray(grid)
    if grid.shape[-3] != spec.d_full:
        raise DataError(
            f"grid has {grid.shape[-3]} channels but reduction expects {spec.d_full}"
        )
    if spec.kind == "random":
        return np.ascontiguousarray(np.take(grid, spec.indices, axis=-3))
    centered = grid - spec.mean.astype(grid.dtype).reshape(
        (1,) * (grid.ndim - 3) + (-1, 1, 1)
    )
    proj = spec.projection.astype(np.float64)
    out = np.einsum("ed,...dhw->...ehw", proj, centered.astype(np.float64))
    return out.astype(np.float32)
