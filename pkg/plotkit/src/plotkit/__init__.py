"""Batch figure renderer for coding-campaign CSV sweeps."""

from .figures import KINDS, PlotSpec, render
from .tables import REQUIRED_COLUMNS, Row, SchemaMismatch, load_table

__all__ = ["KINDS", "PlotSpec", "render", "REQUIRED_COLUMNS", "Row",
           "SchemaMismatch", "load_table"]
