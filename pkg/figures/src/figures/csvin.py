"""Reader for the simulator's CSV contract.

Files begin with ``# key=value`` comment lines, then a header row, then data
rows.  Values are parsed as floats only at plot time; this reader hands back
strings so the renderer stays a pure function of the file contents.
"""

from __future__ import annotations

import csv
from pathlib import Path


def read_table(path: Path) -> tuple[dict, list[str], list[list[str]]]:
    """Return (preamble, column names, data rows) for one CSV file."""
    preamble: dict[str, str] = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for record in reader:
            if not record:
                continue
            if record[0].startswith("#"):
                text = ",".join(record).lstrip("#").strip()
                key, sep, value = text.partition("=")
                if sep:
                    preamble[key.strip()] = value.strip()
                continue
            if not columns:
                columns = record
                continue
            rows.append(record)
    return preamble, columns, rows
