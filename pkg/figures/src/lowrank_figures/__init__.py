"""Renderers for the lowrank-phases CSV/JSON output contract."""

from .io import SCHEMA_TAG, SchemaError
from .render import FIGURE_IDS, FigureSpec, render, slope_annotation

__all__ = ["FIGURE_IDS", "FigureSpec", "SCHEMA_TAG", "SchemaError", "render", "slope_annotation"]
