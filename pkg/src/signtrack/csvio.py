"""Deterministic CSV and JSON writers for run outputs.

Every file starts with a ``#`` comment preamble carrying the config hash and
master seed, so any output is traceable to the run that produced it.  Floats
are written with 17 significant digits (lossless for IEEE doubles) and all
serialization is fully deterministic: identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["format_value", "write_csv", "write_json", "read_csv"]


def format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_csv(path, columns, rows, preamble: dict) -> None:
    """Write a comment preamble, a header row, and data rows.

    ``rows`` is an iterable of sequences matching ``columns``; values are
    formatted via :func:`format_value`.
    """
    lines = [f"# {key}={value}" for key, value in preamble.items()]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        lines.append(",".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, obj: dict) -> None:
    """Write a JSON summary with sorted keys and a trailing newline."""
    Path(path).write_text(
        json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="ascii"
    )


def read_csv(path):
    """Read a CSV written by :func:`write_csv`.

    Returns ``(preamble, columns, rows)`` where ``preamble`` is the comment
    dict, ``columns`` the header names, and ``rows`` a list of string tuples.
    """
    preamble: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[tuple[str, ...]] = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                preamble[key.strip()] = value.strip()
            continue
        parts = tuple(line.split(","))
        if columns is None:
            columns = list(parts)
        else:
            rows.append(parts)
    if columns is None:
        raise ValueError(f"{path} has no header row")
    return preamble, columns, rows
