"""Backbone export tooling: packaging pretrained CNNs and golden fixtures."""

from .export import (
    RECIPES,
    ExportError,
    ExportRecipe,
    build_tap_model,
    dump_golden,
    export_backbone,
    probe_shapes,
)
from .pftio import read_pft, write_pft

__all__ = [
    "RECIPES",
    "ExportError",
    "ExportRecipe",
    "build_tap_model",
    "dump_golden",
    "export_backbone",
    "probe_shapes",
    "read_pft",
    "write_pft",
]
