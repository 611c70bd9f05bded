"""Convert torchvision CNNs into backbone package directories.

A package is ``model.pt`` (TorchScript; forward returns one tensor per tap
in manifest order) plus ``manifest.json`` declaring tap names/shapes, the
input size, and the normalization constants of the pretraining corpus.

Shipped recipes tap the first three residual stages of ResNet18 and
Wide-ResNet-50-2. Other torchvision architectures work by naming the tap
submodules explicitly; the tap list is data, not code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torchvision.models import get_model
from torchvision.models.feature_extraction import create_feature_extractor

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExportRecipe:
    architecture: str
    tap_layers: tuple[str, ...]
    input_size: int = 224
    norm_mean: tuple[float, float, float] = IMAGENET_MEAN
    norm_std: tuple[float, float, float] = IMAGENET_STD


RECIPES = {
    "r18": ExportRecipe("resnet18", ("layer1", "layer2", "layer3")),
    "wr50": ExportRecipe("wide_resnet50_2", ("layer1", "layer2", "layer3")),
}


class _TapWrapper(torch.nn.Module):
    """Returns the tapped feature maps as a tuple, in recipe order."""

    def __init__(self, extractor, keys: list[str]):
        super().__init__()
        self.extractor = extractor
        self.keys = keys

    def forward(self, x):
        out = self.extractor(x)
        result: list[torch.Tensor] = []
        for k in self.keys:
            result.append(out[k])
        return tuple(result)


def build_tap_model(recipe: ExportRecipe, pretrained: bool = True,
                    seed: int | None = None) -> torch.nn.Module:
    """Instantiate the architecture and expose the tap layers as outputs."""
    if seed is not None:
        torch.manual_seed(seed)
    weights = "IMAGENET1K_V1" if pretrained else None
    try:
        net = get_model(recipe.architecture, weights=weights)
    except (ValueError, KeyError) as e:
        raise ExportError(f"unknown architecture {recipe.architecture!r}: {e}") from e
    net.eval()
    return_nodes = {name: name for name in recipe.tap_layers}
    try:
        extractor = create_feature_extractor(net, return_nodes=return_nodes)
    except ValueError as e:
        raise ExportError(f"unresolvable layer name in {recipe.tap_layers}: {e}") from e
    return _TapWrapper(extractor, list(recipe.tap_layers)).eval()


def probe_shapes(module: torch.nn.Module, input_size: int) -> list[tuple[int, int, int]]:
    with torch.no_grad():
        outs = module(torch.zeros(1, 3, input_size, input_size))
    return [tuple(o.shape[1:]) for o in outs]


def export_backbone(recipe: ExportRecipe, out_dir, pretrained: bool = True,
                    seed: int | None = None) -> Path:
    """Write model.pt + manifest.json; returns the package directory."""
    module = build_tap_model(recipe, pretrained=pretrained, seed=seed)
    shapes = probe_shapes(module, recipe.input_size)

    try:
        scripted = torch.jit.script(module)
    except Exception:
        # Fall back to tracing at a fixed batch size; convolutional nets
        # generalize the batch dimension under trace.
        scripted = torch.jit.trace(
            module, torch.zeros(2, 3, recipe.input_size, recipe.input_size)
        )
    scripted_shapes = probe_shapes(scripted, recipe.input_size)
    if scripted_shapes != shapes:
        raise ExportError(
            f"shape probe mismatch after scripting: {scripted_shapes} vs {shapes}"
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scripted.save(str(out_dir / "model.pt"))
    manifest = {
        "name": recipe.architecture,
        "input_size": recipe.input_size,
        "taps": [
            {"name": name, "channels": s[0], "height": s[1], "width": s[2]}
            for name, s in zip(recipe.tap_layers, shapes)
        ],
        "normalization": {"mean": list(recipe.norm_mean), "std": list(recipe.norm_std)},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out_dir


def load_input_tensor(image_path, recipe: ExportRecipe) -> np.ndarray:
    """Decode an image at the backbone's native input size and normalize it.

    Golden fixtures are authored at input_size x input_size exactly, so no
    resampling happens here and the consumer's preprocessing reduces to the
    same scale-and-normalize arithmetic.
    """
    from PIL import Image

    with Image.open(image_path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    s = recipe.input_size
    if rgb.shape[:2] != (s, s):
        raise ExportError(
            f"golden fixture {image_path} must be {s}x{s}, got {rgb.shape[:2]}"
        )
    x = rgb / 255.0
    x = (x - np.asarray(recipe.norm_mean)) / np.asarray(recipe.norm_std)
    return x.transpose(2, 0, 1).astype(np.float32)


def dump_golden(recipe: ExportRecipe, module: torch.nn.Module, image_paths,
                out_dir, tolerance: float = 1e-4) -> Path:
    """Run the eager model on fixture images and dump activations as .pft.

    Writes golden.json recording the per-image tap files, the preprocessing
    geometry, and the max-abs tolerance any other runtime must meet.
    """
    from .pftio import write_pft

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    module.eval()
    for p in image_paths:
        p = Path(p)
        x = torch.from_numpy(load_input_tensor(p, recipe)[None])
        with torch.no_grad():
            outs = module(x)
        files = []
        for k, o in enumerate(outs):
            arr = o[0].cpu().numpy().astype(np.float32)
            if not np.isfinite(arr).all():
                raise ExportError(f"non-finite activations for {p}")
            name = f"{p.stem}.tap{k}.pft"
            write_pft(arr, out_dir / name)
            files.append(name)
        entries.append({"image": p.name, "files": files})
    golden = {
        "architecture": recipe.architecture,
        "input_size": recipe.input_size,
        "preprocess": {"resize_to": recipe.input_size, "crop_to": None},
        "max_abs_tolerance": tolerance,
        "images": entries,
    }
    (out_dir / "golden.json").write_text(json.dumps(golden, indent=2))
    return out_dir
