"""Per-position multivariate Gaussians and Mahalanobis scoring.

fit() estimates, for every grid position independently, the sample mean and
the unbiased sample covariance of the training embedding vectors, then adds
epsilon * I so every covariance is full rank:

    cov = (1 / (N - 1)) * sum_k (x_k - mu)(x_k - mu)^T + epsilon * I

The model stores the lower Cholesky factor of each covariance instead of an
inverse; scoring solves the triangular system L y = (x - mu) and returns
||y||_2, which equals sqrt((x - mu)^T cov^-1 (x - mu)).

Accumulation runs in float64 with a Welford-style update so the training
images stream through one at a time; storage is float32.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import ReductionSpec, identity_reduction
from .errors import DataError, NumericError
from .imageops import PreprocessConfig

MODEL_MAGIC = b"PADM"
MODEL_VERSION = 1
# Header JSON is space-padded to a block multiple so the file size depends
# only on the grid dims, D, and the reduction payload, never on metadata
# digit counts (e.g. N_train).
_HEADER_BLOCK = 4096

DEFAULT_EPSILON = 0.01


@dataclass
class PadimModel:
    """Fitted per-position Gaussian parameters plus pipeline metadata.

    mu: [G0, G1, D] float32, cov_factor: [G0, G1, D, D] float32 lower
    Cholesky factors. The first two axes follow the activation map's
    spatial axes.
    """

    mu: np.ndarray
    cov_factor: np.ndarray
    epsilon: float
    reduction: ReductionSpec
    preprocess: PreprocessConfig | None = None
    backbone_id: str = ""
    n_train: int = 0

    def __post_init__(self):
        if self.mu.ndim != 3 or self.cov_factor.ndim != 4:
            raise DataError(
                f"bad parameter shapes: mu {self.mu.shape}, cov_factor {self.cov_factor.shape}"
            )
        if self.cov_factor.shape[:2] != self.mu.shape[:2] or \
           self.cov_factor.shape[2:] != (self.mu.shape[2], self.mu.shape[2]):
            raise DataError(
                f"mu {self.mu.shape} and cov_factor {self.cov_factor.shape} disagree"
            )
        if self.epsilon <= 0:
            raise DataError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.mu.shape[0], self.mu.shape[1]

    @property
    def dim(self) -> int:
        return self.mu.shape[2]

    def covariance(self) -> np.ndarray:
        """Reconstruct the full covariances L @ L^T, [G0, G1, D, D] float64."""
        ell = self.cov_factor.astype(np.float64)
        return np.einsum("hwik,hwjk->hwij", ell, ell)


def _as_position_major(grid: np.ndarray, dim: int | None = None) -> np.ndarray:
    grid = np.asarray(grid)
    if grid.ndim != 3:
        raise DataError(f"expected a [D, H, W] embedding grid, got shape {grid.shape}")
    if dim is not None and grid.shape[0] != dim:
        raise DataError(f"grid has D={grid.shape[0]}, expected D={dim}")
    return grid.transpose(1, 2, 0).astype(np.float64)


def fit(
    train_grids,
    epsilon: float = DEFAULT_EPSILON,
    *,
    reduction: ReductionSpec | None = None,
    preprocess: PreprocessConfig | None = None,
    backbone_id: str = "",
) -> PadimModel:
    """Fit one Gaussian per grid position from a stream of embedding grids.

    train_grids yields [D, H, W] arrays (already reduced). At least two
    images are required. Only O(H * W * D^2) accumulator memory is held; the
    stream is consumed once.
    """
    if epsilon <= 0:
        raise DataError(f"epsilon must be > 0, got {epsilon}")
    count = 0
    mean = None
    m2 = None
    for grid in train_grids:
        x = _as_position_major(grid)
        if mean is None:
            mean = np.zeros_like(x)
            m2 = np.zeros(x.shape + (x.shape[-1],), dtype=np.float64)
        elif x.shape != mean.shape:
            raise DataError(
                f"grid shape {x.shape[::-1]} differs from first image {mean.shape[::-1]}"
            )
        count += 1
        delta = x - mean
        mean += delta / count
        delta2 = x - mean
        m2 += np.einsum("hwi,hwj->hwij", delta, delta2)
    if count < 2:
        raise DataError(f"fit requires at least 2 training images, got {count}")

    dim = mean.shape[-1]
    cov = m2 / (count - 1)
    cov += epsilon * np.eye(dim)

    eps_used = epsilon
    for _ in range(4):
        try:
            factor = np.linalg.cholesky(cov)
            break
        except np.linalg.LinAlgError:
            # Cannot happen for epsilon > 0 barring float pathology; bump and retry.
            bump = 9.0 * eps_used
            eps_used *= 10.0
            warnings.warn(
                f"covariance factorization failed, retrying with epsilon={eps_used:g}"
            )
            cov += bump * np.eye(dim)
    else:
        raise NumericError("covariance factorization failed even after regularization")

    if reduction is None:
        reduction = identity_reduction(dim)
    return PadimModel(
        mu=mean.astype(np.float32),
        cov_factor=factor.astype(np.float32),
        epsilon=eps_used,
        reduction=reduction,
        preprocess=preprocess,
        backbone_id=backbone_id,
        n_train=count,
    )


def solve_lower_batched(ell: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution for stacks of lower-triangular systems.

    ell: [..., D, D] lower triangular, rhs: [..., D]. Vectorized over the
    leading axes; the loop runs over D only.
    """
    dim = ell.shape[-1]
    y = np.empty_like(rhs, dtype=np.float64)
    y[..., 0] = rhs[..., 0] / ell[..., 0, 0]
    for i in range(1, dim):
        acc = np.einsum("...k,...k->...", ell[..., i, :i], y[..., :i])
        y[..., i] = (rhs[..., i] - acc) / ell[..., i, i]
    return y


def mahalanobis_map(model: PadimModel, grid: np.ndarray) -> np.ndarray:
    """Per-position Mahalanobis distances of one embedding grid, [G0, G1] float32."""
    x = _as_position_major(grid, dim=model.dim)
    if x.shape[:2] != model.grid_shape:
        raise DataError(
            f"grid {x.shape[:2]} does not match model grid {model.grid_shape}"
        )
    delta = x - model.mu.astype(np.float64)
    y = solve_lower_batched(model.cov_factor.astype(np.float64), delta)
    return np.sqrt(np.einsum("hwi,hwi->hw", y, y)).astype(np.float32)


def fit_per_layer(
    train_sets,
    epsilon: float = DEFAULT_EPSILON,
    *,
    preprocess: PreprocessConfig | None = None,
    backbone_id: str = "",
) -> list[PadimModel]:
    """Fit one independent model per tap, each on its native grid.

    train_sets yields one activation set (list of [C_l, H_l, W_l]) per image.
    """
    counts = 0
    means: list[np.ndarray] | None = None
    m2s: list[np.ndarray] | None = None
    for acts in train_sets:
        if not acts:
            raise DataError("activation set is empty")
        xs = [_as_position_major(np.asarray(a)) for a in acts]
        if means is None:
            means = [np.zeros_like(x) for x in xs]
            m2s = [np.zeros(x.shape + (x.shape[-1],), dtype=np.float64) for x in xs]
        elif len(xs) != len(means):
            raise DataError("tap count changed between images")
        counts += 1
        for x, mean, m2 in zip(xs, means, m2s):
            if x.shape != mean.shape:
                raise DataError("tap shape changed between images")
            delta = x - mean
            mean += delta / counts
            m2 += np.einsum("hwi,hwj->hwij", delta, x - mean)
    if counts < 2:
        raise DataError(f"fit requires at least 2 training images, got {counts}")

    models = []
    for mean, m2 in zip(means, m2s):
        dim = mean.shape[-1]
        cov = m2 / (counts - 1) + epsilon * np.eye(dim)
        factor = np.linalg.cholesky(cov)
        models.append(PadimModel(
            mu=mean.astype(np.float32),
            cov_factor=factor.astype(np.float32),
            epsilon=epsilon,
            reduction=identity_reduction(dim),
            preprocess=preprocess,
            backbone_id=backbone_id,
            n_train=counts,
        ))
    return models


def ensemble_sum(maps) -> np.ndarray:
    """Elementwise sum of score maps already brought to a common size."""
    if not maps:
        raise DataError("ensemble_sum needs at least one map")
    arrays = [np.asarray(m) for m in maps]
    first = arrays[0]
    for a in arrays[1:]:
        if a.shape != first.shape:
            raise DataError(f"shape mismatch in ensemble: {a.shape} vs {first.shape}")
    return np.sum(arrays, axis=0)


def save_model(model: PadimModel, path) -> None:
    """Serialize to the ".padim" container.

    Layout: magic "PADM" | u32 version | u64 header length | header JSON
    (space-padded to a 4096-byte multiple) | mu payload | cov_factor
    payload, both raw little-endian float32, row-major.
    """
    g0, g1 = model.grid_shape
    header = {
        "W": g0,
        "H": g1,
        "D": model.dim,
        "epsilon": model.epsilon,
        "backbone_id": model.backbone_id,
        "N_train": model.n_train,
        "preprocess": None if model.preprocess is None else model.preprocess.to_dict(),
        "reduction": model.reduction.to_dict(),
    }
    blob = json.dumps(header).encode("utf-8")
    padded_len = ((len(blob) // _HEADER_BLOCK) + 1) * _HEADER_BLOCK
    blob = blob.ljust(padded_len, b" ")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "wb") as f:
            f.write(MODEL_MAGIC)
            f.write(struct.pack("<I", MODEL_VERSION))
            f.write(struct.pack("<Q", padded_len))
            f.write(blob)
            f.write(np.ascontiguousarray(model.mu, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(model.cov_factor, dtype="<f4").tobytes())
    except OSError as e:
        raise DataError(f"cannot write model file {path}: {e}") from e


def load_model(path) -> PadimModel:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    if len(blob) < 16 or blob[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: bad magic (not a model file)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    (hlen,) = struct.unpack_from("<Q", blob, 8)
    if len(blob) < 16 + hlen:
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt header JSON: {e}") from e
    g0, g1, dim = int(header["W"]), int(header["H"]), int(header["D"])
    mu_count = g0 * g1 * dim
    cov_count = g0 * g1 * dim * dim
    expected = 16 + hlen + 4 * (mu_count + cov_count)
    if len(blob) != expected:
        raise DataError(
            f"{path}: payload length mismatch (expected {expected} bytes, got {len(blob)})"
        )
    mu = np.frombuffer(blob, dtype="<f4", count=mu_count, offset=16 + hlen)
    cov = np.frombuffer(blob, dtype="<f4", count=cov_count,
                        offset=16 + hlen + 4 * mu_count)
    return PadimModel(
        mu=mu.reshape(g0, g1, dim).copy(),
        cov_factor=cov.reshape(g0, g1, dim, dim).copy(),
        epsilon=float(header["epsilon"]),
        reduction=ReductionSpec.from_dict(header["reduction"]),
        preprocess=None if header.get("preprocess") is None
        else PreprocessConfig.from_dict(header["preprocess"]),
        backbone_id=header.get("backbone_id", ""),
        n_train=int(header.get("N_train", 0)),
    )
