"""Export CLI: package a backbone and dump golden activation fixtures."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .export import RECIPES, ExportError, ExportRecipe, build_tap_model, dump_golden, export_backbone


def _recipe(name: str, taps: tuple[str, ...], input_size: int) -> ExportRecipe:
    if name in RECIPES and not taps:
        return RECIPES[name]
    if not taps:
        raise ExportError(
            f"architecture {name!r} has no shipped recipe; pass --tap layer names"
        )
    return ExportRecipe(architecture=name, tap_layers=taps, input_size=input_size)


@click.group()
def main():
    """Backbone package exporter."""


@main.command("export")
@click.option("--arch", default="r18", show_default=True,
              help="Recipe alias (r18, wr50) or torchvision model name.")
@click.option("--tap", "taps", multiple=True, help="Tap submodule names (repeatable).")
@click.option("--input-size", default=224, show_default=True)
@click.option("--pretrained/--random-init", default=True, show_default=True)
@click.option("--seed", type=int, default=None, help="Weight seed for --random-init.")
@click.option("--out", "out_dir", required=True)
def cmd_export(arch, taps, input_size, pretrained, seed, out_dir):
    """Write a backbone package directory (model.pt + manifest.json)."""
    try:
        recipe = _recipe(arch, taps, input_size)
        path = export_backbone(recipe, out_dir, pretrained=pretrained, seed=seed)
    except ExportError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(str(path))


@main.command("golden")
@click.option("--arch", default="r18", show_default=True)
@click.option("--tap", "taps", multiple=True)
@click.option("--input-size", default=224, show_default=True)
@click.option("--pretrained/--random-init", default=True, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--images", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
def cmd_golden(arch, taps, input_size, pretrained, seed, images, out_dir):
    """Dump eager-mode activation tensors for fixture images."""
    try:
        recipe = _recipe(arch, taps, input_size)
        module = build_tap_model(recipe, pretrained=pretrained, seed=seed)
        path = dump_golden(recipe, module, [Path(p) for p in images], out_dir)
    except ExportError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(str(path))


if __name__ == "__main__":
    main()
