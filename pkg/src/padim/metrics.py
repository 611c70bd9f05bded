"""Threshold-independent evaluation: ROC AUC and the per-region-overlap score.

Both metrics depend only on the ranking of scores. Ties are handled by
collapsing equal scores into a single threshold step; the ROC area then
equals the Mann-Whitney U statistic normalized by n_pos * n_neg.

The per-region-overlap curve plots, against the false positive rate pooled
over all normal pixels of the dataset, the mean fraction of each
ground-truth connected component (8-connectivity) classified anomalous. Its
score is the area under the curve up to an FPR limit (default 0.3),
normalized by that limit. Classification at threshold t is ``score >= t``
and the point (0, overlap at the highest threshold) is prepended so the
curve starts at FPR 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .anomalymap import AnomalyMap
from .errors import DataError
from .validation import check_binary_labels

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending
    fpr: np.ndarray  # nondecreasing, starts 0, ends 1
    tpr: np.ndarray
    auc: float


@dataclass(frozen=True)
class ProCurve:
    fpr: np.ndarray  # achieved points clipped to [0, fpr_limit]
    overlap: np.ndarray  # mean per-region overlap at each point
    fpr_limit: float
    pro_score: float


@dataclass(frozen=True)
class GroundTruthMask:
    """Binary mask with its anomalous regions labeled (8-connectivity)."""

    mask: np.ndarray  # bool [H, W]
    labels: np.ndarray  # int32 [H, W], 0 = background
    n_regions: int

    @classmethod
    def from_array(cls, arr) -> "GroundTruthMask":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DataError(f"mask must be 2-d, got shape {arr.shape}")
        mask = arr > 0.5 if arr.dtype.kind == "f" else arr != 0
        labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
        return cls(mask=mask, labels=labels.astype(np.int32), n_regions=int(n))


def roc_auc(scores, labels) -> RocCurve:
    """Exact trapezoidal ROC curve with equal scores grouped per threshold."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = check_binary_labels(labels)
    if scores.shape != labels.shape:
        raise DataError(f"scores ({scores.shape}) and labels ({labels.shape}) disagree")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present in the labels")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # Last index of each tie group of equal scores.
    step_ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(y)[step_ends]
    fps = (step_ends + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=s[step_ends], fpr=fpr, tpr=tpr, auc=auc)


def image_auroc(image_scores, labels) -> RocCurve:
    """ROC over image-level scores (anomaly detection at the image level)."""
    return roc_auc(image_scores, labels)


def _coerce_map(m) -> np.ndarray:
    if isinstance(m, AnomalyMap):
        m = m.map
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DataError(f"score map must be 2-d, got shape {m.shape}")
    return m


def _coerce_mask(m) -> GroundTruthMask:
    if isinstance(m, GroundTruthMask):
        return m
    return GroundTruthMask.from_array(m)


def pro_score(maps, masks, fpr_limit: float = 0.3, steps: int | None = None) -> ProCurve:
    """Per-region-overlap curve and its normalized area up to fpr_limit.

    maps and masks are aligned lists over test images. With steps=None every
    distinct pooled score becomes a threshold (exact sweep); a positive
    steps gives that many evenly spaced thresholds between the global max
    and min score.
    """
    if not 0 < fpr_limit <= 1:
        raise DataError(f"fpr_limit must be in (0, 1], got {fpr_limit}")
    if len(maps) != len(masks) or not maps:
        raise DataError("maps and masks must be non-empty and aligned")

    normal_scores = []
    region_scores: list[np.ndarray] = []
    all_min, all_max = np.inf, -np.inf
    for m, gt in zip(maps, masks):
        m = _coerce_map(m)
        gt = _coerce_mask(gt)
        if m.shape != gt.mask.shape:
            raise DataError(f"map {m.shape} and mask {gt.mask.shape} sizes differ")
        normal_scores.append(m[~gt.mask])
        for r in range(1, gt.n_regions + 1):
            region_scores.append(np.sort(m[gt.labels == r]))
        all_min = min(all_min, float(m.min()))
        all_max = max(all_max, float(m.max()))
    if not region_scores:
        raise DataError("no anomalous regions in the ground truth")
    normal_sorted = np.sort(np.concatenate(normal_scores))
    if normal_sorted.size == 0:
        raise DataError("no normal pixels in the ground truth")

    if steps is None:
        pooled = [normal_sorted] + region_scores
        thresholds = np.unique(np.concatenate(pooled))[::-1]
    else:
        if steps < 1:
            raise DataError(f"steps must be >= 1, got {steps}")
        thresholds = np.linspace(all_max, all_min, steps)

    # score >= t counts, vectorized over all thresholds at once.
    fpr = 1.0 - np.searchsorted(normal_sorted, thresholds, side="left") / normal_sorted.size
    overlap = np.zeros_like(thresholds)
    for rs in region_scores:
        overlap += 1.0 - np.searchsorted(rs, thresholds, side="left") / rs.size
    overlap /= len(region_scores)

    fpr = np.r_[0.0, fpr]
    overlap = np.r_[overlap[0], overlap]

    score = _integrate_to_limit(fpr, overlap, fpr_limit)
    keep = fpr <= fpr_limit
    return ProCurve(fpr=fpr[keep], overlap=overlap[keep],
                    fpr_limit=fpr_limit, pro_score=score)


def _integrate_to_limit(fpr: np.ndarray, overlap: np.ndarray, limit: float) -> float:
    """Trapezoidal area of the piecewise-linear curve on [0, limit] / limit."""
    boundary = float(np.interp(limit, fpr, overlap))
    inside = fpr < limit
    xs = np.r_[fpr[inside], limit]
    ys = np.r_[overlap[inside], boundary]
    area = float(np.trapezoid(ys, xs))
    return min(max(area / limit, 0.0), 1.0)


@dataclass
class EvalReport:
    """AUROC / PRO results for one model on one test split."""

    class_name: str = ""
    pixel_roc: RocCurve | None = None
    image_roc: RocCurve | None = None
    pro: ProCurve | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_curves: bool = False) -> dict:
        d = {
            "class": self.class_name,
            "pixel_auroc": None if self.pixel_roc is None else self.pixel_roc.auc,
            "image_auroc": None if self.image_roc is None else self.image_roc.auc,
            "pro_score": None if self.pro is None else self.pro.pro_score,
        }
        d.update(self.extra)
        if include_curves:
            if self.pixel_roc is not None:
                d["pixel_roc"] = {"fpr": self.pixel_roc.fpr.tolist(),
                                  "tpr": self.pixel_roc.tpr.tolist()}
            if self.image_roc is not None:
                d["image_roc"] = {"fpr": self.image_roc.fpr.tolist(),
                                  "tpr": self.image_roc.tpr.tolist()}
            if self.pro is not None:
                d["pro_curve"] = {"fpr": self.pro.fpr.tolist(),
                                  "overlap": self.pro.overlap.tolist()}
        return d
