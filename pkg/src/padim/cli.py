"""Command-line interface: fit, score, eval, ablate, bench, extract, make-rd.

Feature sources: either a backbone package (runs the CNN, needs torch) or a
directory of precomputed activation tensors with an index.json ("file
mode", no neural runtime). Exactly one source must be given.

Exit codes: 0 success, 2 configuration error, 3 data error, 4
runtime/numeric error.
"""

from __future__ import annotations

import functools
import json
import resource
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, anomalymap, backbone, dataset, embedding, gaussian, metrics
from .errors import ConfigError, DataError, NumericError
from .imageops import PreprocessConfig, load_image_rgb, preprocess_image, save_image_rgb
from .tensorio import write_tensor


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            _fail(str(e), 2)
        except DataError as e:
            _fail(str(e), 3)
        except (NumericError, FloatingPointError, np.linalg.LinAlgError) as e:
            _fail(str(e), 4)

    return wrapper


def _peak_rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(text)


class FeatureSource:
    """Uniform iteration over (id, activations[, label, mask]) per image."""

    def __init__(self, activations: str | None, backbone_path: str | None,
                 data_dir: str | None, preprocess: PreprocessConfig):
        if (activations is None) == (backbone_path is None):
            raise ConfigError(
                "exactly one feature source is required: --activations or --backbone"
            )
        self.preprocess = preprocess
        self.index = None
        self.pkg = None
        self.data = None
        if activations is not None:
            self.index = backbone.load_activation_index(activations)
            # File mode: the CLI resize/crop flags do not apply; geometry
            # comes from the index when recorded there.
            self.preprocess = (PreprocessConfig.from_dict(self.index.preprocess)
                               if self.index.preprocess else None)
        else:
            self.pkg = backbone.load_backbone(backbone_path)
            if data_dir is None:
                raise ConfigError("--backbone mode needs --data <class directory>")
            self.data = dataset.scan_dataset(data_dir)

    @property
    def backbone_id(self) -> str:
        return self.index.backbone_id if self.index is not None else self.pkg.name

    def _extract_one(self, image_path: Path) -> list[np.ndarray]:
        img = load_image_rgb(image_path)
        x = preprocess_image(img, self.preprocess,
                             mean=self.pkg.norm_mean, std=self.pkg.norm_std)
        return [a[0] for a in backbone.extract(self.pkg, x[None])]

    def iter_train(self):
        if self.index is not None:
            if not self.index.train:
                raise DataError("activation index has no train entries")
            for e in self.index.train:
                yield e.image_id, self.index.load(e)
        else:
            for p in self.data.train:
                yield p.stem, self._extract_one(p)

    def iter_test(self):
        """Yields (id, activations, label, mask_path None-able)."""
        if self.index is not None:
            if not self.index.test:
                raise DataError("activation index has no test entries")
            for e in self.index.test:
                if e.label is None:
                    raise DataError(f"test entry {e.image_id} has no label")
                yield e.image_id, self.index.load(e), e.label, e.mask_path
        else:
            if not self.data.test:
                raise DataError(f"no test images under {self.data.root}")
            for e in self.data.test:
                tag = e.path.parent.name
                yield f"{tag}_{e.path.stem}", self._extract_one(e.path), e.label, e.mask_path


def _load_mask_for(map_shape: tuple[int, int], mask_path: Path | None,
                   cfg: PreprocessConfig | None) -> np.ndarray:
    """Ground-truth mask brought to map resolution (nearest), zeros if absent."""
    if mask_path is None:
        return np.zeros(map_shape, dtype=bool)
    if mask_path.suffix == ".pft":
        from .tensorio import read_tensor

        mask = read_tensor(mask_path) > 0.5
    else:
        mask = dataset.load_mask(mask_path)
        if cfg is not None and mask.shape != map_shape:
            rows = (np.arange(cfg.resize_to) * mask.shape[0]) // cfg.resize_to
            cols = (np.arange(cfg.resize_to) * mask.shape[1]) // cfg.resize_to
            mask = mask[rows[:, None], cols[None, :]]
            if cfg.crop_to is not None:
                from .imageops import center_crop

                mask = center_crop(mask, cfg.crop_to)
    if mask.shape != map_shape:
        rows = (np.arange(map_shape[0]) * mask.shape[0]) // map_shape[0]
        cols = (np.arange(map_shape[1]) * mask.shape[1]) // map_shape[1]
        mask = mask[rows[:, None], cols[None, :]]
    return mask


def _resolve_reduction(rd: int | None, pca: int | None, seed: int):
    if rd is not None and pca is not None:
        raise ConfigError("--rd and --pca are mutually exclusive")
    if rd is not None:
        return ("random", rd, seed)
    if pca is not None:
        return ("pca", pca, seed)
    return ("none", None, seed)


def _fit_model(source: FeatureSource, kind: str, d_prime: int | None, seed: int,
               epsilon: float) -> gaussian.PadimModel:
    spec = None
    if kind == "pca":
        def pooled_chunks():
            for _, acts in source.iter_train():
                g = embedding.build_embeddings(acts)
                yield g.reshape(g.shape[0], -1).T
        spec = embedding.fit_pca(pooled_chunks(), d_prime)

    def grids():
        nonlocal spec
        for _, acts in source.iter_train():
            g = embedding.build_embeddings(acts)
            if spec is None:
                if kind == "random":
                    spec = embedding.make_random_reduction(g.shape[0], d_prime, seed)
                else:
                    spec = embedding.identity_reduction(g.shape[0])
            yield embedding.apply_reduction(g, spec)

    model = gaussian.fit(
        grids(), epsilon=epsilon, preprocess=source.preprocess,
        backbone_id=source.backbone_id,
    )
    model.reduction = spec
    return model


def _out_size(model: gaussian.PadimModel, override: int | None) -> int:
    if override is not None:
        return override
    if model.preprocess is not None:
        return model.preprocess.output_size
    return 4 * max(model.grid_shape)


def _score_one(model, acts, out_size, sigma):
    grid = embedding.apply_reduction(embedding.build_embeddings(acts), model.reduction)
    dist = gaussian.mahalanobis_map(model, grid)
    return anomalymap.postprocess(dist, out_size, sigma)


@click.group()
@click.version_option(__version__)
def main():
    """Patch-distribution anomaly detection pipeline."""


def _source_options(fn):
    fn = click.option("--activations", type=click.Path(exists=True, file_okay=False),
                      default=None, help="Directory of precomputed activations (file mode).")(fn)
    fn = click.option("--backbone", "backbone_path", default=None,
                      help="Backbone package directory (needs torch).")(fn)
    fn = click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
                      default=None, help="Dataset class directory (backbone mode).")(fn)
    fn = click.option("--resize", default=256, show_default=True,
                      help="Square resize applied before the crop.")(fn)
    fn = click.option("--crop", default=224, show_default=True,
                      help="Center-crop size; use --no-crop to disable.")(fn)
    fn = click.option("--no-crop", is_flag=True, default=False,
                      help="Resize only, no center crop.")(fn)
    return fn


def _make_preprocess(resize: int, crop: int, no_crop: bool) -> PreprocessConfig:
    return PreprocessConfig(resize_to=resize, crop_to=None if no_crop else crop)


@main.command("fit")
@_source_options
@click.option("--rd", type=int, default=None, help="Random reduction target dimension.")
@click.option("--pca", type=int, default=None, help="PCA reduction target dimension.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epsilon", type=float, default=gaussian.DEFAULT_EPSILON, show_default=True,
              help="Covariance regularization.")
@click.option("--out", "out_path", required=True, help="Output .padim model file.")
@cli_errors
def cmd_fit(activations, backbone_path, data_dir, resize, crop, no_crop,
            rd, pca, seed, epsilon, out_path):
    """Fit per-position Gaussians on the train split and write a model file."""
    t0 = time.perf_counter()
    source = FeatureSource(activations, backbone_path, data_dir,
                           _make_preprocess(resize, crop, no_crop))
    kind, d_prime, seed = _resolve_reduction(rd, pca, seed)
    model = _fit_model(source, kind, d_prime, seed, epsilon)
    gaussian.save_model(model, out_path)
    elapsed = time.perf_counter() - t0
    g0, g1 = model.grid_shape
    _emit({
        "model": str(out_path),
        "grid": [g0, g1],
        "dim": model.dim,
        "n_train": model.n_train,
        "reduction": model.reduction.kind,
        "fit_seconds": round(elapsed, 3),
        "peak_rss_mb": round(_peak_rss_mb(), 1),
    }, None)


@main.command("score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--activations", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--split", type=click.Choice(["train", "test"]), default="test",
              show_default=True, help="Which split of the activation index to score.")
@click.option("--backbone", "backbone_path", default=None)
@click.option("--images", multiple=True, type=click.Path(exists=True),
              help="Image files to score (backbone mode).")
@click.option("--sigma", type=float, default=anomalymap.DEFAULT_SIGMA, show_default=True)
@click.option("--out-size", type=int, default=None, help="Anomaly map side length.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@cli_errors
def cmd_score(model_path, activations, split, backbone_path, images, sigma,
              out_size, out_dir):
    """Score images: write raw maps (.pft), heatmaps (.png) and scores JSON."""
    model = gaussian.load_model(model_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    size = _out_size(model, out_size)

    items = []
    if activations is not None:
        if backbone_path is not None:
            raise ConfigError("give either --activations or --backbone, not both")
        index = backbone.load_activation_index(activations)
        entries = index.train if split == "train" else index.test
        if not entries:
            raise DataError(f"activation index has no {split} entries")
        items = [(e.image_id, index.load(e)) for e in entries]
    else:
        if backbone_path is None:
            raise ConfigError("need --activations or --backbone with --images")
        if not images:
            raise ConfigError("backbone mode needs at least one --images path")
        pkg = backbone.load_backbone(backbone_path)
        cfg = model.preprocess if model.preprocess is not None else PreprocessConfig()
        for p in images:
            img = load_image_rgb(p)
            x = preprocess_image(img, cfg, mean=pkg.norm_mean, std=pkg.norm_std)
            items.append((Path(p).stem, [a[0] for a in backbone.extract(pkg, x[None])]))

    scores = {}
    for image_id, acts in items:
        amap = _score_one(model, acts, size, sigma)
        write_tensor(amap.map, out_dir / f"{image_id}.map.pft")
        save_image_rgb(anomalymap.render_heatmap(amap), out_dir / f"{image_id}.png")
        scores[image_id] = amap.image_score
    _emit({"model": str(model_path), "sigma": sigma, "out_size": size,
           "scores": scores}, str(out_dir / "scores.json"))


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@_source_options
@click.option("--sigma", type=float, default=anomalymap.DEFAULT_SIGMA, show_default=True)
@click.option("--out-size", type=int, default=None)
@click.option("--pro-steps", type=int, default=None,
              help="Threshold count for the PRO sweep; default uses all distinct scores.")
@click.option("--curves", is_flag=True, default=False, help="Embed raw curves in the report.")
@click.option("--curves-out", type=click.Path(file_okay=False), default=None,
              help="Also dump curves as .pft tensors into this directory.")
@click.option("--out", "out_path", default=None, help="Report JSON path (default stdout).")
@cli_errors
def cmd_eval(model_path, activations, backbone_path, data_dir, resize, crop, no_crop,
             sigma, out_size, pro_steps, curves, curves_out, out_path):
    """Evaluate a model on a test split: pixel/image AUROC and PRO score."""
    model = gaussian.load_model(model_path)
    source = FeatureSource(activations, backbone_path, data_dir,
                           model.preprocess or _make_preprocess(resize, crop, no_crop))
    report = _evaluate_model(model, source, sigma, out_size, pro_steps)
    payload = report.to_dict(include_curves=curves)
    if curves_out:
        cdir = Path(curves_out)
        cdir.mkdir(parents=True, exist_ok=True)
        write_tensor(np.stack([report.pixel_roc.fpr, report.pixel_roc.tpr]),
                     cdir / "pixel_roc.pft")
        write_tensor(np.stack([report.image_roc.fpr, report.image_roc.tpr]),
                     cdir / "image_roc.pft")
        write_tensor(np.stack([report.pro.fpr, report.pro.overlap]),
                     cdir / "pro_curve.pft")
    _emit(payload, out_path)


def _evaluate_model(model, source, sigma, out_size, pro_steps,
                    class_name: str = "") -> metrics.EvalReport:
    size = _out_size(model, out_size)
    maps, masks, img_scores, img_labels = [], [], [], []
    for image_id, acts, label, mask_path in source.iter_test():
        amap = _score_one(model, acts, size, sigma)
        mask = _load_mask_for(amap.map.shape, mask_path, source.preprocess)
        maps.append(amap.map)
        masks.append(metrics.GroundTruthMask.from_array(mask))
        img_scores.append(amap.image_score)
        img_labels.append(label)
    return _report_from_maps(maps, masks, img_scores, img_labels, pro_steps, class_name)


def _report_from_maps(maps, masks, img_scores, img_labels, pro_steps,
                      class_name: str = "") -> metrics.EvalReport:
    pixel_scores = np.concatenate([m.ravel() for m in maps])
    pixel_labels = np.concatenate([g.mask.ravel().astype(np.int64) for g in masks])
    return metrics.EvalReport(
        class_name=class_name,
        pixel_roc=metrics.roc_auc(pixel_scores, pixel_labels),
        image_roc=metrics.image_auroc(img_scores, img_labels),
        pro=metrics.pro_score(maps, masks, steps=pro_steps),
        extra={"n_test_images": len(maps)},
    )


@main.command("ablate")
@_source_options
@click.option("--rd", "rd_dims", multiple=True, type=int,
              help="Random-reduction dims to compare (repeatable).")
@click.option("--pca", "pca_dims", multiple=True, type=int,
              help="PCA dims to compare (repeatable).")
@click.option("--rd-seeds", type=int, default=10, show_default=True,
              help="Number of random-reduction seeds to average.")
@click.option("--epsilon", type=float, default=gaussian.DEFAULT_EPSILON, show_default=True)
@click.option("--sigma", type=float, default=anomalymap.DEFAULT_SIGMA, show_default=True)
@click.option("--out-size", type=int, default=None)
@click.option("--pro-steps", type=int, default=None)
@click.option("--markdown", "markdown_path", default=None, help="Also write a markdown table.")
@click.option("--out", "out_path", default=None)
@cli_errors
def cmd_ablate(activations, backbone_path, data_dir, resize, crop, no_crop, rd_dims,
               pca_dims, rd_seeds, epsilon, sigma, out_size, pro_steps,
               markdown_path, out_path):
    """Compare per-layer models, their sum ensemble, the full model, and reductions."""
    source = FeatureSource(activations, backbone_path, data_dir,
                           _make_preprocess(resize, crop, no_crop))
    rows = run_ablation(source, list(rd_dims), list(pca_dims), rd_seeds,
                        epsilon, sigma, out_size, pro_steps)
    payload = {"rows": rows}
    if markdown_path:
        Path(markdown_path).write_text(_markdown_table(rows))
        click.echo(f"wrote {markdown_path}", err=True)
    _emit(payload, out_path)


def run_ablation(source, rd_dims, pca_dims, rd_seeds, epsilon=gaussian.DEFAULT_EPSILON,
                 sigma=anomalymap.DEFAULT_SIGMA, out_size=None, pro_steps=None):
    """Ablation table rows; shared by the CLI and the test harness."""
    per_layer = gaussian.fit_per_layer(
        (acts for _, acts in source.iter_train()), epsilon=epsilon,
        preprocess=source.preprocess, backbone_id=source.backbone_id,
    )
    test_items = list(source.iter_test())
    n_taps = len(test_items[0][1])
    if n_taps != len(per_layer):
        raise DataError("tap count differs between train and test")

    size = out_size
    if size is None:
        size = (source.preprocess.output_size if source.preprocess is not None
                else 4 * max(per_layer[0].grid_shape))

    labels = [label for _, _, label, _ in test_items]
    masks = [
        metrics.GroundTruthMask.from_array(
            _load_mask_for((size, size), mask_path, source.preprocess))
        for _, _, _, mask_path in test_items
    ]

    def eval_maps(maps, name, extra=None):
        scores = [float(m.max()) for m in maps]
        rep = _report_from_maps(maps, masks, scores, labels, pro_steps, name)
        row = {"name": name,
               "pixel_auroc": rep.pixel_roc.auc,
               "image_auroc": rep.image_roc.auc,
               "pro_score": rep.pro.pro_score}
        if extra:
            row.update(extra)
        return row

    rows = []
    layer_maps = []
    for k, model in enumerate(per_layer):
        maps = []
        for _, acts, _, _ in test_items:
            dist = gaussian.mahalanobis_map(model, np.asarray(acts[k]))
            maps.append(anomalymap.postprocess(dist, size, sigma).map)
        layer_maps.append(maps)
        rows.append(eval_maps(maps, f"layer{k + 1}"))

    ensemble = [gaussian.ensemble_sum([layer_maps[k][i] for k in range(n_taps)])
                for i in range(len(test_items))]
    rows.append(eval_maps(ensemble, "layer_sum"))

    def reduced_row(kind, d_prime, seed, name, extra=None):
        model = _fit_model(source, kind, d_prime, seed, epsilon)
        maps = [_score_one(model, acts, size, sigma).map for _, acts, _, _ in test_items]
        return eval_maps(maps, name, extra)

    rows.append(reduced_row("none", None, 0, "full"))

    for d in rd_dims:
        seed_rows = [reduced_row("random", d, s, f"rd{d}_seed{s}") for s in range(rd_seeds)]
        agg = {"name": f"rd{d}", "seeds": rd_seeds}
        for key in ("pixel_auroc", "image_auroc", "pro_score"):
            vals = np.array([r[key] for r in seed_rows])
            agg[key] = float(vals.mean())
            agg[f"{key}_sem"] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rows.append(agg)
    for d in pca_dims:
        rows.append(reduced_row("pca", d, 0, f"pca{d}"))
    return rows


def _markdown_table(rows) -> str:
    cols = ["name", "pixel_auroc", "image_auroc", "pro_score"]
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        cells = [str(r["name"])]
        for c in cols[1:]:
            v = r.get(c)
            cells.append("" if v is None else f"{100 * v:.1f}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@main.command("bench")
@click.option("--model", "model_paths", multiple=True, required=True,
              type=click.Path(exists=True), help="Model file(s); repeat to compare.")
@click.option("--activations", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--split", type=click.Choice(["train", "test"]), default="test",
              show_default=True)
@click.option("--repetitions", type=int, default=5, show_default=True)
@click.option("--sigma", type=float, default=anomalymap.DEFAULT_SIGMA, show_default=True)
@click.option("--out", "out_path", default=None)
@cli_errors
def cmd_bench(model_paths, activations, split, repetitions, sigma, out_path):
    """Measure per-image scoring time and model size across model files."""
    report = run_bench(model_paths, activations, split, repetitions, sigma)
    _emit(report, out_path)


def run_bench(model_paths, activations, split="test", repetitions=5,
              sigma=anomalymap.DEFAULT_SIGMA) -> dict:
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")
    index = backbone.load_activation_index(activations)
    entries = index.train if split == "train" else index.test
    if not entries:
        raise DataError(f"activation index has no {split} entries")
    act_sets = [index.load(e) for e in entries]

    results = []
    for path in model_paths:
        model = gaussian.load_model(path)
        size = _out_size(model, None)
        grids = [embedding.apply_reduction(embedding.build_embeddings(a), model.reduction)
                 for a in act_sets]
        # Warm-up pass, then timed rounds; the minimum round is the estimate.
        for g in grids:
            _ = anomalymap.postprocess(gaussian.mahalanobis_map(model, g), size, sigma)
        round_times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            for g in grids:
                _ = anomalymap.postprocess(gaussian.mahalanobis_map(model, g), size, sigma)
            round_times.append((time.perf_counter() - t0) / len(grids))
        embed_t0 = time.perf_counter()
        for a in act_sets:
            _ = embedding.apply_reduction(embedding.build_embeddings(a), model.reduction)
        embed_time = (time.perf_counter() - embed_t0) / len(act_sets)
        results.append({
            "model": str(path),
            "n_train": model.n_train,
            "grid": list(model.grid_shape),
            "dim": model.dim,
            "model_file_bytes": Path(path).stat().st_size,
            "images": len(grids),
            "repetitions": repetitions,
            "score_seconds_per_image_min": min(round_times),
            "score_seconds_per_image_mean": float(np.mean(round_times)),
            "embed_seconds_per_image": embed_time,
        })
    return {"split": split, "models": results}


@main.command("extract")
@click.option("--backbone", "backbone_path", required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Dataset class directory to dump (train + test).")
@click.option("--images", multiple=True, type=click.Path(exists=True),
              help="Ad-hoc image files (written as unlabeled test entries).")
@click.option("--resize", default=256, show_default=True)
@click.option("--crop", default=224, show_default=True)
@click.option("--no-crop", is_flag=True, default=False)
@click.option("--out", "out_dir", required=True)
@cli_errors
def cmd_extract(backbone_path, data_dir, images, resize, crop, no_crop, out_dir):
    """Dump backbone activations as .pft files plus an index.json (file mode input)."""
    pkg = backbone.load_backbone(backbone_path)
    cfg = _make_preprocess(resize, crop, no_crop)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def dump(image_id: str, img_path: Path) -> list[str]:
        img = load_image_rgb(img_path)
        x = preprocess_image(img, cfg, mean=pkg.norm_mean, std=pkg.norm_std)
        acts = backbone.extract(pkg, x[None])
        files = []
        for k, a in enumerate(acts):
            name = f"{image_id}.tap{k}.pft"
            write_tensor(a[0], out / name)
            files.append(name)
        return files

    train_entries, test_entries = [], []
    if data_dir is not None:
        idx = dataset.scan_dataset(data_dir)
        for p in idx.train:
            image_id = f"train_good_{p.stem}"
            train_entries.append({"id": image_id, "files": dump(image_id, p)})
        for e in idx.test:
            image_id = f"test_{e.path.parent.name}_{e.path.stem}"
            entry = {"id": image_id, "files": dump(image_id, e.path), "label": e.label}
            if e.mask_path is not None:
                mask_name = f"{image_id}.mask.png"
                mask = dataset.load_mask(e.mask_path, size=cfg.resize_to)
                if cfg.crop_to is not None:
                    from .imageops import center_crop

                    mask = center_crop(mask, cfg.crop_to)
                save_image_rgb(np.where(mask, 255, 0).astype(np.uint8), out / mask_name)
                entry["mask"] = mask_name
            test_entries.append(entry)
    for p in images:
        image_id = Path(p).stem
        test_entries.append({"id": image_id, "files": dump(image_id, Path(p)),
                             "label": None})
    if not train_entries and not test_entries:
        raise ConfigError("nothing to extract: give --data or --images")
    backbone.write_activation_index(out, len(pkg.taps), train_entries, test_entries,
                                    preprocess=cfg.to_dict(), backbone_id=pkg.name)
    click.echo(json.dumps({"out": str(out), "train": len(train_entries),
                           "test": len(test_entries)}))


@main.command("make-rd")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", required=True)
@click.option("--resize", type=int, default=256, show_default=True)
@click.option("--crop", type=int, default=224, show_default=True)
@cli_errors
def cmd_make_rd(data_dir, seed, out_dir, resize, crop):
    """Write a randomly rotated and cropped copy of a dataset class."""
    index = dataset.scan_dataset(data_dir)
    t = dataset.RdTransform(resize_to=resize, crop_to=crop, seed=seed)
    out_index = dataset.make_rd_dataset(index, seed, out_dir, transform=t)
    click.echo(json.dumps({"out": str(out_index.root),
                           "train": len(out_index.train),
                           "test": len(out_index.test)}))


if __name__ == "__main__":
    main()
