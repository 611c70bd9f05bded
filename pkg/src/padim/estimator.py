"""scikit-learn style estimator wrapping the full pipeline.

The detector consumes activation sets (one list of [C_l, H_l, W_l] arrays
per image, or a prebuilt [N, D, H, W] embedding stack), so it runs without
any neural runtime. fit() learns the per-position Gaussians on normal
samples only; transform() returns full-resolution anomaly maps and
score_samples() the image-level anomaly scores (higher means more
anomalous).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import anomalymap, embedding, gaussian
from .errors import ConfigError
from .validation import check_fitted


def _iter_grids(X, reduction):
    for item in X:
        if isinstance(item, np.ndarray) and item.ndim == 3:
            grid = item
        else:
            grid = embedding.build_embeddings(item)
        yield embedding.apply_reduction(grid, reduction)


class PadimDetector(BaseEstimator):
    """Per-patch Gaussian anomaly detector with Mahalanobis scoring.

    Parameters
    ----------
    reduction : {"none", "random", "pca"}
        Embedding dimensionality reduction fitted/frozen at fit time.
    d_prime : int or None
        Target dimension for "random"/"pca"; ignored for "none".
    seed : int
        Seed for the random coordinate selection.
    epsilon : float
        Covariance regularization added as epsilon * I.
    sigma : float
        Gaussian smoothing of the upsampled anomaly maps.
    out_size : int or None
        Side of the output anomaly maps; None keeps four times the grid.
    """

    def __init__(self, reduction="none", d_prime=None, seed=0,
                 epsilon=gaussian.DEFAULT_EPSILON, sigma=anomalymap.DEFAULT_SIGMA,
                 out_size=None):
        self.reduction = reduction
        self.d_prime = d_prime
        self.seed = seed
        self.epsilon = epsilon
        self.sigma = sigma
        self.out_size = out_size

    def _build_reduction(self, first_grid):
        d_full = first_grid.shape[0]
        if self.reduction == "none":
            return embedding.identity_reduction(d_full)
        if self.d_prime is None:
            raise ConfigError(f"reduction {self.reduction!r} requires d_prime")
        if self.reduction == "random":
            return embedding.make_random_reduction(d_full, self.d_prime, self.seed)
        if self.reduction == "pca":
            return None  # resolved in fit, needs the data
        raise ConfigError(f"unknown reduction {self.reduction!r}")

    def fit(self, X, y=None):
        """Learn the Gaussian parameters from normal samples only."""
        items = list(X)
        if not items:
            raise ConfigError("fit needs a non-empty training sequence")
        grids = [
            it if isinstance(it, np.ndarray) and it.ndim == 3
            else embedding.build_embeddings(it)
            for it in items
        ]
        spec = self._build_reduction(grids[0])
        if spec is None:
            pooled = np.concatenate(
                [g.reshape(g.shape[0], -1).T for g in grids], axis=0
            )
            spec = embedding.fit_pca(pooled, self.d_prime)
        self.reduction_ = spec
        self.model_ = gaussian.fit(
            (embedding.apply_reduction(g, spec) for g in grids),
            epsilon=self.epsilon,
            reduction=spec,
        )
        return self

    def _map_size(self) -> int:
        if self.out_size is not None:
            return self.out_size
        return 4 * max(self.model_.grid_shape)

    def transform(self, X) -> np.ndarray:
        """Anomaly maps for a sequence of samples, stacked [N, S, S]."""
        check_fitted(self, "model_")
        size = self._map_size()
        maps = [
            anomalymap.postprocess(
                gaussian.mahalanobis_map(self.model_, grid), size, self.sigma
            ).map
            for grid in _iter_grids(X, self.reduction_)
        ]
        return np.stack(maps, axis=0)

    def score_samples(self, X) -> np.ndarray:
        """Image-level anomaly scores (max of each smoothed map)."""
        return self.transform(X).max(axis=(1, 2))

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).transform(X)
