"""Error taxonomy for figure rendering."""

from __future__ import annotations


class FigureError(Exception):
    """Base class: the figure cannot be produced from the given inputs."""


class MissingColumn(FigureError):
    """An input CSV lacks a column the figure kind requires."""

    def __init__(self, path, needed: str):
        self.path = path
        self.needed = needed
        super().__init__(f"{path}: no column matching {needed!r}")


class EmptyInput(FigureError):
    """An input CSV has a header but no data rows."""

    def __init__(self, path):
        self.path = path
        super().__init__(f"{path}: no data rows to plot")
