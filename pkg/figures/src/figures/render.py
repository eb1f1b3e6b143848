"""Figure construction from simulator CSV files.

Three kinds are supported, each a direct visualization of columns produced
by the simulator — nothing is recomputed here:

- ``overlay``: zero-order-hold step plot of the true parameter columns plus
  line plots of every estimate column from every input file, shared axes.
- ``diffusion``: trace of the scaled-error columns against the iterate index.
- ``cumavg``: the cumulative-average columns against the iterate index.

Legend entries are the CSV column names, so a figure is traceable to the
exact columns it displays.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .csvin import read_table  # noqa: E402
from .errors import EmptyInput, FigureError, MissingColumn  # noqa: E402

KINDS = ("overlay", "diffusion", "cumavg")

_X_COLUMN = "n"


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input CSVs, the figure kind, and the output image path."""

    inputs: tuple[Path, ...]
    kind: str
    output: Path
    xlabel: str = "n"
    ylabel: str = "value"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        inputs = tuple(Path(p) for p in self.inputs)
        if not inputs:
            raise FigureError("at least one input CSV is required")
        for path in inputs:
            if not path.is_file():
                raise FigureError(f"input CSV not found: {path}")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "output", Path(self.output))


def _matching(columns: list[str], base: str) -> list[str]:
    """Columns named ``base`` exactly or ``base_<suffix>`` (componentwise)."""
    return [c for c in columns if c == base or c.startswith(base + "_")]


def _series(path: Path, columns: list[str], rows: list[list[str]], name: str):
    index = columns.index(name)
    try:
        return [float(row[index]) for row in rows]
    except (ValueError, IndexError):
        raise FigureError(f"{path}: column {name!r} contains a non-numeric value")


def _load(path: Path, required_bases: list[str]):
    """Read one table and check it carries every required column group."""
    _, columns, rows = read_table(path)
    if _X_COLUMN not in columns:
        raise MissingColumn(path, _X_COLUMN)
    for base in required_bases:
        if not _matching(columns, base):
            raise MissingColumn(path, base)
    if not rows:
        raise EmptyInput(path)
    return columns, rows


def build_figure(spec: FigureSpec):
    """Construct the matplotlib figure for a spec without writing anything."""
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    if spec.kind == "overlay":
        for position, path in enumerate(spec.inputs):
            columns, rows = _load(path, ["alpha", "theta"])
            x = _series(path, columns, rows, _X_COLUMN)
            if position == 0:
                # The true parameter is piecewise constant: hold each value
                # until the next jump.  Every input carries an identical
                # parameter path, so the first file's copy is drawn once.
                for name in _matching(columns, "alpha"):
                    ax.step(x, _series(path, columns, rows, name), where="post", label=name)
            for name in _matching(columns, "theta"):
                ax.plot(x, _series(path, columns, rows, name), label=name)
    elif spec.kind == "diffusion":
        for path in spec.inputs:
            columns, rows = _load(path, ["z"])
            x = _series(path, columns, rows, _X_COLUMN)
            for name in _matching(columns, "z"):
                ax.plot(x, _series(path, columns, rows, name), label=name)
    else:
        for path in spec.inputs:
            columns, rows = _load(path, ["cumavg_alpha", "cumavg_theta"])
            x = _series(path, columns, rows, _X_COLUMN)
            for name in _matching(columns, "cumavg"):
                ax.plot(x, _series(path, columns, rows, name), label=name)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.legend(loc="best")
    return fig


def render(spec: FigureSpec) -> Path:
    """Build the figure and write the image file; returns the output path."""
    fig = build_figure(spec)
    try:
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output)
    finally:
        plt.close(fig)
    return spec.output
