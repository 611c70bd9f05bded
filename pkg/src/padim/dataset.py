"""MVTec-AD-style directory trees and their randomly perturbed variant.

A class directory looks like::

    <class>/train/good/*.png
    <class>/test/good/*.png
    <class>/test/<defect>/*.png
    <class>/ground_truth/<defect>/<stem>_mask.png

Training images are all normal; every anomalous test image must have a
ground-truth mask. The perturbed variant applies, per image, a random
rotation in (-10, +10) degrees followed by a random 256 -> 224 crop, with
the identical geometry applied to the image and its mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .imageops import load_image_rgb, resize_bicubic, rotate, save_image_rgb

_IMAGE_EXTS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class TestEntry:
    path: Path
    label: int  # 0 normal, 1 anomalous
    mask_path: Path | None


@dataclass
class DatasetIndex:
    class_name: str
    root: Path
    train: list[Path]
    test: list[TestEntry]

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.train), len(self.test)

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "root": str(self.root),
            "train": [str(p) for p in self.train],
            "test": [
                {"path": str(e.path), "label": e.label,
                 "mask": None if e.mask_path is None else str(e.mask_path)}
                for e in self.test
            ],
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _list_images(d: Path) -> list[Path]:
    if not d.is_dir():
        return []
    return sorted(p for p in d.iterdir() if p.suffix.lower() in _IMAGE_EXTS)


def scan_dataset(class_root) -> DatasetIndex:
    """Index one class directory; ordering is deterministic (lexicographic)."""
    class_root = Path(class_root)
    if not class_root.is_dir():
        raise DataError(f"dataset class directory not found: {class_root}")
    train = _list_images(class_root / "train" / "good")
    if not train:
        raise DataError(f"empty train split in {class_root / 'train' / 'good'}")

    test_dir = class_root / "test"
    gt_dir = class_root / "ground_truth"
    entries: list[TestEntry] = []
    if test_dir.is_dir():
        for defect_dir in sorted(p for p in test_dir.iterdir() if p.is_dir()):
            is_normal = defect_dir.name == "good"
            for img in _list_images(defect_dir):
                if is_normal:
                    entries.append(TestEntry(path=img, label=0, mask_path=None))
                    continue
                mask = gt_dir / defect_dir.name / f"{img.stem}_mask{img.suffix}"
                if not mask.is_file():
                    # MVTec masks are always PNG even for non-PNG images.
                    mask = gt_dir / defect_dir.name / f"{img.stem}_mask.png"
                if not mask.is_file():
                    raise DataError(f"missing ground-truth mask for {img}")
                entries.append(TestEntry(path=img, label=1, mask_path=mask))
    return DatasetIndex(class_name=class_root.name, root=class_root,
                        train=train, test=entries)


def load_mask(path, size: int | None = None) -> np.ndarray:
    """Load a mask image as bool [H, W], optionally nearest-resized to size**2."""
    arr = load_image_rgb(path).max(axis=2)
    mask = arr > 127
    if size is not None and mask.shape != (size, size):
        rows = (np.arange(size) * mask.shape[0]) // size
        cols = (np.arange(size) * mask.shape[1]) // size
        mask = mask[rows[:, None], cols[None, :]]
    return mask


@dataclass(frozen=True)
class RdTransform:
    """Random rotation plus random crop, shared between an image and its mask."""

    rotation_range: tuple[float, float] = (-10.0, 10.0)
    resize_to: int = 256
    crop_to: int = 224
    seed: int = 0

    def draw(self, image_index: int) -> tuple[float, int, int]:
        """Angle and crop offsets for one image; deterministic per (seed, index)."""
        rng = np.random.default_rng([self.seed, image_index])
        angle = float(rng.uniform(*self.rotation_range))
        span = self.resize_to - self.crop_to
        off_r = int(rng.integers(0, span + 1))
        off_c = int(rng.integers(0, span + 1))
        return angle, off_r, off_c


def apply_rd_transform(
    img: np.ndarray,
    mask: np.ndarray | None,
    angle: float,
    off_r: int,
    off_c: int,
    crop_to: int,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Rotate then crop; bicubic/reflect for the image, nearest/zero for the mask.

    Zero padding for masks means rotation never fabricates anomalous pixels.
    The mask is re-binarized at 0.5 afterwards.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape[0] < off_r + crop_to or img.shape[1] < off_c + crop_to:
        raise DataError(
            f"image {img.shape[:2]} too small for crop {crop_to} at offset ({off_r}, {off_c})"
        )
    rot = rotate(img, angle, interp="bicubic", border="reflect")
    out_img = rot[off_r : off_r + crop_to, off_c : off_c + crop_to]
    out_mask = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64)
        mrot = rotate(m, angle, interp="nearest", border="zero")
        out_mask = mrot[off_r : off_r + crop_to, off_c : off_c + crop_to] >= 0.5
    return out_img, out_mask


def make_rd_dataset(index: DatasetIndex, seed: int, out_dir,
                    transform: RdTransform | None = None) -> DatasetIndex:
    """Write a perturbed copy of the class; same seed gives byte-identical output."""
    import dataclasses

    t = RdTransform(seed=seed) if transform is None else dataclasses.replace(transform, seed=seed)
    out_dir = Path(out_dir) / index.class_name
    counter = 0

    def _relocate(p: Path) -> Path:
        return out_dir / p.relative_to(index.root)

    for img_path in index.train:
        _write_perturbed(img_path, None, t, counter, _relocate(img_path), None)
        counter += 1
    for entry in index.test:
        mask_out = None if entry.mask_path is None else _relocate(entry.mask_path)
        _write_perturbed(entry.path, entry.mask_path, t, counter,
                         _relocate(entry.path), mask_out)
        counter += 1
    return scan_dataset(out_dir)


def _write_perturbed(img_path: Path, mask_path: Path | None, t: RdTransform,
                     image_index: int, img_out: Path, mask_out: Path | None) -> None:
    img = load_image_rgb(img_path).astype(np.float64)
    img = resize_bicubic(img, t.resize_to, t.resize_to)
    mask = None
    if mask_path is not None:
        mask = load_mask(mask_path, size=t.resize_to).astype(np.float64)
    angle, off_r, off_c = t.draw(image_index)
    out_img, out_mask = apply_rd_transform(img, mask, angle, off_r, off_c, t.crop_to)
    save_image_rgb(out_img, img_out)
    if out_mask is not None and mask_out is not None:
        save_image_rgb(np.where(out_mask, 255, 0).astype(np.uint8), mask_out)
