"""Exporter tests, including the golden cross-runtime acceptance check.

The cross-runtime check drives the consumer pipeline strictly through its
external surfaces: the exported package directory, the `padim extract` CLI,
and the .pft files it writes.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from backbone_export import (
    RECIPES,
    ExportError,
    ExportRecipe,
    build_tap_model,
    dump_golden,
    export_backbone,
    probe_shapes,
    read_pft,
)

FIXTURES = Path(__file__).parent / "fixtures"
FIXTURE_IMAGES = [FIXTURES / n for n in ("gradient.png", "pattern.png", "blocks.png")]

R18_SHAPES = [(64, 56, 56), (128, 28, 28), (256, 14, 14)]


@pytest.fixture(scope="module")
def r18_package(tmp_path_factory):
    out = tmp_path_factory.mktemp("pkg") / "r18"
    export_backbone(RECIPES["r18"], out, pretrained=False, seed=0)
    return out


class TestExportBackbone:
    def test_r18_probe_shapes(self, r18_package):
        manifest = json.loads((r18_package / "manifest.json").read_text())
        shapes = [(t["channels"], t["height"], t["width"]) for t in manifest["taps"]]
        assert shapes == R18_SHAPES
        assert manifest["input_size"] == 224
        assert manifest["normalization"]["mean"] == [0.485, 0.456, 0.406]
        assert (r18_package / "model.pt").is_file()

    def test_wr50_channel_total_is_1792(self, tmp_path):
        module = build_tap_model(RECIPES["wr50"], pretrained=False, seed=0)
        shapes = probe_shapes(module, 224)
        assert [s[0] for s in shapes] == [256, 512, 1024]
        assert sum(s[0] for s in shapes) == 1792

    def test_bad_layer_name_is_error(self):
        recipe = ExportRecipe("resnet18", ("layer1", "no_such_layer"))
        with pytest.raises(ExportError, match="unresolvable layer name"):
            build_tap_model(recipe, pretrained=False, seed=0)

    def test_unknown_architecture_is_error(self):
        recipe = ExportRecipe("not_a_model", ("layer1",))
        with pytest.raises(ExportError, match="unknown architecture"):
            build_tap_model(recipe, pretrained=False, seed=0)

    def test_scripted_model_matches_eager(self, r18_package):
        module = build_tap_model(RECIPES["r18"], pretrained=False, seed=0)
        scripted = torch.jit.load(str(r18_package / "model.pt"))
        torch.manual_seed(3)
        x = torch.randn(1, 3, 224, 224)
        with torch.no_grad():
            eager = module(x)
            jit = scripted(x)
        for a, b in zip(eager, jit):
            assert float((a - b).abs().max()) < 1e-6

    def test_batch_dimension_generalizes(self, r18_package):
        scripted = torch.jit.load(str(r18_package / "model.pt"))
        with torch.no_grad():
            outs = scripted(torch.zeros(3, 3, 224, 224))
        assert [tuple(o.shape) for o in outs] == [(3,) + s for s in R18_SHAPES]


class TestDumpGolden:
    def test_zero_image_gives_finite_activations(self, tmp_path):
        module = build_tap_model(RECIPES["r18"], pretrained=False, seed=0)
        with torch.no_grad():
            outs = module(torch.zeros(1, 3, 224, 224))
        for o in outs:
            assert torch.isfinite(o).all()

    def test_dumps_are_loadable_and_deterministic(self, tmp_path):
        recipe = RECIPES["r18"]
        module = build_tap_model(recipe, pretrained=False, seed=0)
        a = dump_golden(recipe, module, FIXTURE_IMAGES[:1], tmp_path / "a")
        b = dump_golden(recipe, module, FIXTURE_IMAGES[:1], tmp_path / "b")
        fa = sorted(p.name for p in a.glob("*.pft"))
        fb = sorted(p.name for p in b.glob("*.pft"))
        assert fa == fb and len(fa) == 3
        for name in fa:
            assert (a / name).read_bytes() == (b / name).read_bytes()
        arr = read_pft(a / fa[0])
        assert arr.ndim == 3

    def test_wrong_fixture_size_is_error(self, tmp_path):
        from PIL import Image

        small = tmp_path / "small.png"
        Image.fromarray(np.zeros((64, 64, 3), dtype=np.uint8)).save(small)
        recipe = RECIPES["r18"]
        module = build_tap_model(recipe, pretrained=False, seed=0)
        with pytest.raises(ExportError, match="must be 224x224"):
            dump_golden(recipe, module, [small], tmp_path / "g")


class TestConsumerFitShapes:
    def test_r18_rd100_model_grid_is_56x56(self, r18_package, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(5)
        train_dir = tmp_path / "cls" / "train" / "good"
        train_dir.mkdir(parents=True)
        for i in range(8):
            arr = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
            Image.fromarray(arr).save(train_dir / f"{i:03d}.png")

        model_path = tmp_path / "model.padim"
        proc = subprocess.run(
            [sys.executable, "-m", "padim.cli", "fit",
             "--backbone", str(r18_package), "--data", str(tmp_path / "cls"),
             "--rd", "100", "--out", str(model_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        summary = json.loads(proc.stdout)
        assert summary["grid"] == [56, 56]
        assert summary["dim"] == 100
        assert summary["n_train"] == 8


class TestGoldenCrossRuntime:
    """Exported package under the consumer runtime reproduces the exporter's
    activations within 1e-4 max-abs on the 3-image fixture."""

    def test_consumer_extract_matches_golden(self, r18_package, tmp_path):
        recipe = RECIPES["r18"]
        module = build_tap_model(recipe, pretrained=False, seed=0)
        golden_dir = dump_golden(recipe, module, FIXTURE_IMAGES, tmp_path / "golden")
        golden = json.loads((golden_dir / "golden.json").read_text())
        tolerance = golden["max_abs_tolerance"]

        out_dir = tmp_path / "extracted"
        cmd = [
            sys.executable, "-m", "padim.cli", "extract",
            "--backbone", str(r18_package),
            "--resize", "224", "--no-crop",
            "--out", str(out_dir),
        ]
        for img in FIXTURE_IMAGES:
            cmd += ["--images", str(img)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr

        worst = 0.0
        for entry in golden["images"]:
            stem = Path(entry["image"]).stem
            for k, fname in enumerate(entry["files"]):
                ref = read_pft(golden_dir / fname)
                got = read_pft(out_dir / f"{stem}.tap{k}.pft")
                assert got.shape == ref.shape == R18_SHAPES[k]
                worst = max(worst, float(np.abs(got - ref).max()))
        assert worst < tolerance, f"max-abs deviation {worst} exceeds {tolerance}"
