"""Full-resolution anomaly maps and image-level scores.

A distance map from the grid resolution is bicubically upsampled to the
input-image resolution and smoothed with a Gaussian filter; the image-level
score is the maximum of the smoothed map. Scores stay in raw Mahalanobis
units; any normalization happens only at visualization time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .imageops import gaussian_blur, upsample_bicubic

DEFAULT_SIGMA = 4.0


@dataclass(frozen=True)
class AnomalyMap:
    map: np.ndarray  # [S, S] float32
    image_score: float

    def __post_init__(self):
        if self.map.ndim != 2:
            raise DataError(f"anomaly map must be 2-d, got shape {self.map.shape}")


def postprocess(dist_map: np.ndarray, out_size: int, sigma: float = DEFAULT_SIGMA) -> AnomalyMap:
    """Upsample a [H, W] distance map to out_size**2, blur, take the max."""
    dist_map = np.asarray(dist_map)
    if dist_map.ndim != 2:
        raise DataError(f"expected a 2-d distance map, got shape {dist_map.shape}")
    if out_size < max(dist_map.shape):
        raise DataError(
            f"out_size {out_size} is smaller than the distance map {dist_map.shape}"
        )
    up = upsample_bicubic(dist_map, out_size, out_size)
    blurred = gaussian_blur(up, sigma).astype(np.float32)
    return AnomalyMap(map=blurred, image_score=float(blurred.max()))


def _jet(values: np.ndarray) -> np.ndarray:
    """Blue-to-red colormap; normal regions render blue, anomalies warm.

    The dark tails of the classic formula are skipped so warmth (R - B)
    grows monotonically with the value.
    """
    v = 0.125 + 0.75 * np.clip(values, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return (np.stack([r, g, b], axis=-1) * 255.0).round().astype(np.uint8)


def render_heatmap(amap: AnomalyMap, value_range: tuple[float, float] | None = None) -> np.ndarray:
    """Render to an 8-bit RGB image.

    value_range None normalizes per image by the map's own min/max (a
    constant map renders as a single color); (lo, hi) clips to a fixed range
    so colors are comparable across images.
    """
    m = np.asarray(amap.map, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DataError("anomaly map contains non-finite values")
    if value_range is None:
        lo, hi = float(m.min()), float(m.max())
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
        if hi <= lo:
            raise DataError(f"invalid value range ({lo}, {hi})")
    span = hi - lo
    norm = np.zeros_like(m) if span == 0 else (m - lo) / span
    return _jet(norm)


def overlay_heatmap(image_rgb: np.ndarray, amap: AnomalyMap, alpha: float = 0.5,
                    value_range: tuple[float, float] | None = None) -> np.ndarray:
    """Alpha-blend the rendered heatmap over an RGB image of the same size."""
    base = np.asarray(image_rgb, dtype=np.float64)
    heat = render_heatmap(amap, value_range).astype(np.float64)
    if base.shape != heat.shape:
        raise DataError(f"image {base.shape} and heatmap {heat.shape} sizes differ")
    out = (1.0 - alpha) * base + alpha * heat
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
