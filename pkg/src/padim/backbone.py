"""Pretrained-CNN feature taps, loaded from a portable package directory.

A backbone package is a directory holding ``model.pt`` (a TorchScript
archive whose forward returns one activation tensor per tap, in manifest
order) plus ``manifest.json``::

    {
      "name": "resnet18",
      "input_size": 224,
      "taps": [{"name": "layer1", "channels": 64, "height": 56, "width": 56}, ...],
      "normalization": {"mean": [...], "std": [...]}
    }

Taps must be ordered by non-increasing spatial resolution. Loading probes
the model with a zero batch and checks every declared shape. The torch
runtime is imported lazily; the rest of the pipeline also accepts
precomputed activations from disk ("file mode"), so no neural runtime is
needed to fit, score, or evaluate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .tensorio import read_tensor

MODEL_FILENAME = "model.pt"
MANIFEST_FILENAME = "manifest.json"


@dataclass(frozen=True)
class TapInfo:
    name: str
    channels: int
    height: int
    width: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass
class BackbonePackage:
    """Loaded, probe-validated feature extractor. Immutable after load."""

    name: str
    input_size: int
    taps: list[TapInfo]
    norm_mean: tuple[float, float, float]
    norm_std: tuple[float, float, float]
    path: Path
    _module: object = None

    @property
    def total_channels(self) -> int:
        return sum(t.channels for t in self.taps)


def _require_torch():
    try:
        import torch
    except ImportError as e:
        raise ConfigError(
            "the torch runtime is not installed; install the 'backbone' extra "
            "or supply precomputed activation files instead"
        ) from e
    return torch


def parse_manifest(manifest: dict, package_path: Path) -> BackbonePackage:
    try:
        taps = [
            TapInfo(name=t["name"], channels=int(t["channels"]),
                    height=int(t["height"]), width=int(t["width"]))
            for t in manifest["taps"]
        ]
        pkg = BackbonePackage(
            name=manifest["name"],
            input_size=int(manifest["input_size"]),
            taps=taps,
            norm_mean=tuple(float(v) for v in manifest["normalization"]["mean"]),
            norm_std=tuple(float(v) for v in manifest["normalization"]["std"]),
            path=package_path,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed backbone manifest: {e}") from e
    if not pkg.taps:
        raise DataError("backbone manifest declares no tap points")
    res = [t.height * t.width for t in pkg.taps]
    if any(res[i] < res[i + 1] for i in range(len(res) - 1)):
        raise DataError("tap points must be ordered by decreasing spatial resolution")
    return pkg


def load_backbone(path) -> BackbonePackage:
    """Load and validate a backbone package directory."""
    path = Path(path)
    manifest_path = path / MANIFEST_FILENAME
    model_path = path / MODEL_FILENAME
    if not manifest_path.is_file():
        raise DataError(f"backbone package has no {MANIFEST_FILENAME}: {path}")
    if not model_path.is_file():
        raise DataError(f"backbone package has no {MODEL_FILENAME}: {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read backbone manifest: {e}") from e
    pkg = parse_manifest(manifest, path)

    torch = _require_torch()
    try:
        import warnings

        with warnings.catch_warnings():
            # TorchScript is the chosen interchange container; silence the
            # upstream migration notice so CLI output stays clean.
            warnings.simplefilter("ignore", DeprecationWarning)
            module = torch.jit.load(str(model_path), map_location="cpu")
    except Exception as e:  # torch raises RuntimeError subclasses here
        raise DataError(f"cannot load backbone model graph: {e}") from e
    module.eval()
    pkg._module = module

    # Probe with a zero input and check every declared tap shape.
    probe = _run_module(torch, module, np.zeros((1, 3, pkg.input_size, pkg.input_size),
                                                dtype=np.float32))
    if len(probe) < len(pkg.taps):
        missing = [t.name for t in pkg.taps[len(probe):]]
        raise DataError(f"missing tap point(s) in model outputs: {missing}")
    if len(probe) > len(pkg.taps):
        raise DataError(
            f"model emits {len(probe)} outputs but manifest declares {len(pkg.taps)} taps"
        )
    for tap, out in zip(pkg.taps, probe):
        got = tuple(out.shape[1:])
        if got != tap.shape:
            raise DataError(
                f"tap {tap.name!r}: manifest declares {tap.shape}, model produced {got}"
            )
    return pkg


def _run_module(torch, module, batch: np.ndarray) -> list[np.ndarray]:
    with torch.no_grad():
        out = module(torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32)))
    if isinstance(out, (list, tuple)):
        outs = list(out)
    elif isinstance(out, dict):
        outs = list(out.values())
    else:
        outs = [out]
    return [o.detach().cpu().numpy().astype(np.float32, copy=False) for o in outs]


def extract(pkg: BackbonePackage, batch: np.ndarray) -> list[np.ndarray]:
    """Run the backbone on a preprocessed [B, 3, S, S] batch.

    Returns one [B, C_l, H_l, W_l] float32 array per tap. The loaded module
    is stateless at inference time; concurrent calls are serialized by the
    runtime where required.
    """
    if pkg._module is None:
        raise DataError("backbone package was not loaded via load_backbone")
    batch = np.asarray(batch, dtype=np.float32)
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise DataError(f"expected a [B, 3, S, S] batch, got shape {batch.shape}")
    if batch.shape[2] != pkg.input_size or batch.shape[3] != pkg.input_size:
        raise DataError(
            f"input size {batch.shape[2:]} does not match manifest ({pkg.input_size})"
        )
    torch = _require_torch()
    outs = _run_module(torch, pkg._module, batch)
    if len(outs) != len(pkg.taps):
        raise DataError("model output count changed between probe and extract")
    return outs


# ---------------------------------------------------------------------------
# Activation-file mode: precomputed activations on disk, no neural runtime.
# ---------------------------------------------------------------------------

INDEX_FILENAME = "index.json"


@dataclass(frozen=True)
class ActivationEntry:
    image_id: str
    files: tuple[Path, ...]
    label: int | None = None
    mask_path: Path | None = None


@dataclass
class ActivationIndex:
    """Index of precomputed activation dumps (one .pft file per tap per image)."""

    root: Path
    num_taps: int
    train: list[ActivationEntry]
    test: list[ActivationEntry]
    preprocess: dict | None = None
    backbone_id: str = ""

    def load(self, entry: ActivationEntry) -> list[np.ndarray]:
        acts = [read_tensor(f) for f in entry.files]
        for k, a in enumerate(acts):
            if a.ndim != 3:
                raise DataError(
                    f"{entry.files[k]}: expected a [C, H, W] activation tensor, "
                    f"got shape {a.shape}"
                )
        return acts


def load_activation_index(root) -> ActivationIndex:
    root = Path(root)
    index_path = root / INDEX_FILENAME
    if not index_path.is_file():
        raise DataError(f"activation directory has no {INDEX_FILENAME}: {root}")
    try:
        raw = json.loads(index_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read activation index: {e}") from e

    def _entries(items, split):
        out = []
        for it in items:
            try:
                files = tuple(root / f for f in it["files"])
                entry = ActivationEntry(
                    image_id=str(it["id"]),
                    files=files,
                    label=None if it.get("label") is None else int(it["label"]),
                    mask_path=None if it.get("mask") is None else root / it["mask"],
                )
            except (KeyError, TypeError) as e:
                raise DataError(f"malformed {split} entry in activation index: {e}") from e
            for f in files:
                if not f.is_file():
                    raise DataError(f"activation file missing: {f}")
            if split == "test" and entry.label == 1 and entry.mask_path is None:
                raise DataError(f"anomalous test entry {entry.image_id} has no mask")
            out.append(entry)
        return out

    try:
        num_taps = int(raw["num_taps"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"activation index lacks num_taps: {e}") from e
    idx = ActivationIndex(
        root=root,
        num_taps=num_taps,
        train=_entries(raw.get("train", []), "train"),
        test=_entries(raw.get("test", []), "test"),
        preprocess=raw.get("preprocess"),
        backbone_id=raw.get("backbone_id", ""),
    )
    for e in idx.train + idx.test:
        if len(e.files) != num_taps:
            raise DataError(
                f"entry {e.image_id} has {len(e.files)} activation files, expected {num_taps}"
            )
    return idx


def write_activation_index(root, num_taps: int, train: list[dict], test: list[dict],
                           preprocess: dict | None = None, backbone_id: str = "") -> Path:
    """Write index.json for an activation directory; entries use relative paths."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    payload = {
        "num_taps": num_taps,
        "backbone_id": backbone_id,
        "preprocess": preprocess,
        "train": train,
        "test": test,
    }
    out = root / INDEX_FILENAME
    out.write_text(json.dumps(payload, indent=2))
    return out
