"""Figure rendering for simulator CSV outputs.

Consumes only the CSV files the simulator writes (tracking trajectories,
scaled-error series, cumulative averages) and draws the standard plots; no
statistic is ever recomputed here.
"""

from .csvin import read_table
from .errors import EmptyInput, FigureError, MissingColumn
from .render import KINDS, FigureSpec, build_figure, render

__all__ = [
    "EmptyInput",
    "FigureError",
    "FigureSpec",
    "KINDS",
    "MissingColumn",
    "build_figure",
    "read_table",
    "render",
]

__version__ = "0.1.0"
