"""Per-patch Gaussian modeling for one-class anomaly detection and localization.

Pipeline: pretrained-CNN activations -> per-position patch embeddings
(optionally reduced) -> one multivariate Gaussian per position -> Mahalanobis
distance maps -> smoothed full-resolution anomaly maps with image-level
scores -> AUROC / per-region-overlap evaluation.
"""

from .anomalymap import AnomalyMap, postprocess, render_heatmap
from .embedding import (
    ReductionSpec,
    apply_reduction,
    build_embeddings,
    fit_pca,
    make_random_reduction,
)
from .errors import ConfigError, DataError, NumericError, PadimError
from .estimator import PadimDetector
from .gaussian import (
    PadimModel,
    ensemble_sum,
    fit,
    fit_per_layer,
    load_model,
    mahalanobis_map,
    save_model,
)
from .imageops import PreprocessConfig, gaussian_blur, preprocess_image, upsample_bicubic
from .metrics import EvalReport, GroundTruthMask, image_auroc, pro_score, roc_auc
from .tensorio import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AnomalyMap",
    "ConfigError",
    "DataError",
    "EvalReport",
    "GroundTruthMask",
    "NumericError",
    "PadimDetector",
    "PadimError",
    "PadimModel",
    "PreprocessConfig",
    "ReductionSpec",
    "apply_reduction",
    "build_embeddings",
    "ensemble_sum",
    "fit",
    "fit_pca",
    "fit_per_layer",
    "gaussian_blur",
    "image_auroc",
    "load_model",
    "mahalanobis_map",
    "make_random_reduction",
    "postprocess",
    "preprocess_image",
    "pro_score",
    "read_tensor",
    "render_heatmap",
    "roc_auc",
    "save_model",
    "upsample_bicubic",
    "write_tensor",
]
