"""Image-space operations: bicubic resize, Gaussian blur, preprocessing.

The bicubic kernel is fixed to Catmull-Rom (a = -0.5) and the blur uses a
truncated separable kernel (radius ceil(4*sigma)) with reflect padding that
repeats the edge sample, so a blurred map keeps its mean exactly up to
floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class PreprocessConfig:
    """Square resize followed by an optional square center crop.

    Interpolation is always bicubic.
    """

    resize_to: int = 256
    crop_to: int | None = 224

    def __post_init__(self):
        if self.resize_to < 1:
            raise DataError(f"resize_to must be >= 1, got {self.resize_to}")
        if self.crop_to is not None and not 1 <= self.crop_to <= self.resize_to:
            raise DataError(
                f"crop_to must be in [1, resize_to={self.resize_to}], got {self.crop_to}"
            )

    @property
    def output_size(self) -> int:
        return self.crop_to if self.crop_to is not None else self.resize_to

    def to_dict(self) -> dict:
        return {"resize_to": self.resize_to, "crop_to": self.crop_to}

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(resize_to=int(d["resize_to"]),
                   crop_to=None if d.get("crop_to") is None else int(d["crop_to"]))


def cubic_kernel(x) -> np.ndarray:
    """Catmull-Rom cubic convolution weights (a = -0.5)."""
    a = -0.5
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2 = x * x
    x3 = x2 * x
    inner = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    outer = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, inner, np.where(x < 2.0, outer, 0.0))


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic [n_out, n_in] bicubic interpolation matrix.

    Output sample o is taken at source coordinate (o + 0.5) * n_in/n_out - 0.5
    (half-pixel centers); source taps are clamped at the borders and each
    row is normalized so constant signals are preserved.
    """
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(pos).astype(np.int64)
    frac = pos - base
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(mat, (rows, idx), cubic_kernel(frac - k))
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic resize of a [H, W] or [H, W, C] array. Identity sizes copy bit-exactly."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise DataError(f"resize expects a 2-d or 3-d array, got shape {img.shape}")
    if out_h < 1 or out_w < 1:
        raise DataError(f"output size must be >= 1, got {out_h}x{out_w}")
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    a_rows = _resize_matrix(h, out_h)
    a_cols = _resize_matrix(w, out_w)
    if img.ndim == 2:
        return a_rows @ img @ a_cols.T
    return np.einsum("oh,hwc,pw->opc", a_rows, img, a_cols, optimize=True)


def upsample_bicubic(score_map: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic upsampling of a 2-d score map (both input dims must be >= 2)."""
    score_map = np.asarray(score_map, dtype=np.float64)
    if score_map.ndim != 2:
        raise DataError(f"expected a 2-d map, got shape {score_map.shape}")
    if min(score_map.shape) < 2:
        raise DataError(f"map dims must be >= 2, got {score_map.shape}")
    return resize_bicubic(score_map, out_h, out_w)


def gaussian_blur(score_map: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with kernel radius ceil(4*sigma).

    Borders use reflect padding with the edge sample repeated (the scipy
    'reflect' convention), which preserves the map mean exactly.
    """
    if sigma <= 0:
        raise DataError(f"sigma must be > 0, got {sigma}")
    m = np.asarray(score_map, dtype=np.float64)
    if m.ndim != 2:
        raise DataError(f"expected a 2-d map, got shape {m.shape}")
    radius = int(ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()

    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(m, pad, mode="symmetric")
        out = np.zeros_like(m)
        for k in range(2 * radius + 1):
            if axis == 0:
                out += kernel[k] * padded[k : k + m.shape[0], :]
            else:
                out += kernel[k] * padded[:, k : k + m.shape[1]]
        m = out
    return m


def load_image_rgb(path) -> np.ndarray:
    """Decode an image file to a uint8 [H, W, 3] RGB array."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise DataError(f"cannot decode image {path}: {e}") from e


def save_image_rgb(arr: np.ndarray, path) -> None:
    from PIL import Image

    a = np.asarray(arr)
    if a.dtype != np.uint8:
        a = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(a).save(path)


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape[:2]
    if size > h or size > w:
        raise DataError(f"crop size {size} exceeds image {h}x{w}")
    top = (h - size) // 2
    left = (w - size) // 2
    return img[top : top + size, left : left + size]


def preprocess_image(
    img: np.ndarray,
    cfg: PreprocessConfig,
    mean=None,
    std=None,
) -> np.ndarray:
    """uint8 RGB [H, W, 3] -> normalized float32 [3, S, S] input tensor.

    Channels are scaled to [0, 1], bicubic-resized to cfg.resize_to, center
    cropped to cfg.crop_to when set, then normalized as (x - mean) / std per
    channel. mean/std default to identity (no normalization) and normally
    come from the backbone package manifest.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected an RGB [H, W, 3] image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DataError("zero-size image")
    x = img.astype(np.float64) / 255.0
    x = resize_bicubic(x, cfg.resize_to, cfg.resize_to)
    if cfg.crop_to is not None:
        x = center_crop(x, cfg.crop_to)
    x = x.transpose(2, 0, 1)
    if mean is not None:
        x = x - np.asarray(mean, dtype=np.float64).reshape(3, 1, 1)
    if std is not None:
        x = x / np.asarray(std, dtype=np.float64).reshape(3, 1, 1)
    return x.astype(np.float32)


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Map arbitrary integer indices into [0, n) by edge-repeating reflection."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def rotate(
    img: np.ndarray,
    angle_deg: float,
    interp: str = "bicubic",
    border: str = "reflect",
) -> np.ndarray:
    """Rotate around the image center; output keeps the input size.

    interp: 'bicubic' (Catmull-Rom) or 'nearest'. border: 'reflect'
    (edge-repeating) or 'zero'. Rotation by 0 degrees returns a copy.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise DataError(f"rotate expects 2-d or 3-d array, got shape {img.shape}")
    if angle_deg == 0.0:
        return img.copy()
    h, w = img.shape[:2]
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # Inverse mapping: output pixel -> source coordinate.
    dy, dx = rr - cy, cc - cx
    src_r = cos_t * dy + sin_t * dx + cy
    src_c = -sin_t * dy + cos_t * dx + cx

    if interp == "nearest":
        ir = np.rint(src_r).astype(np.int64)
        ic = np.rint(src_c).astype(np.int64)
        inside = (ir >= 0) & (ir < h) & (ic >= 0) & (ic < w)
        out = np.zeros_like(img)
        if border == "reflect":
            out = img[_reflect_index(ir, h), _reflect_index(ic, w)]
        else:
            out[inside] = img[ir[inside], ic[inside]]
        return out

    base_r = np.floor(src_r).astype(np.int64)
    base_c = np.floor(src_c).astype(np.int64)
    fr = src_r - base_r
    fc = src_c - base_c
    out = np.zeros(img.shape, dtype=np.float64)
    weight_total = np.zeros((h, w), dtype=np.float64)
    inside = (src_r >= -0.5) & (src_r <= h - 0.5) & (src_c >= -0.5) & (src_c <= w - 0.5)
    for kr in range(-1, 3):
        wr = cubic_kernel(fr - kr)
        sr = base_r + kr
        for kc in range(-1, 3):
            wc = cubic_kernel(fc - kc)
            sc = base_c + kc
            wgt = wr * wc
            if border == "reflect":
                sample = img[_reflect_index(sr, h), _reflect_index(sc, w)]
            else:
                ok = (sr >= 0) & (sr < h) & (sc >= 0) & (sc < w)
                sample = img[np.clip(sr, 0, h - 1), np.clip(sc, 0, w - 1)]
                wgt = np.where(ok, wgt, 0.0)
            if img.ndim == 3:
                out += wgt[..., None] * sample
            else:
                out += wgt * sample
            weight_total += wgt
    weight_total = np.where(weight_total == 0.0, 1.0, weight_total)
    out = out / (weight_total[..., None] if img.ndim == 3 else weight_total)
    if border == "zero":
        out[~inside] = 0.0
    return out
