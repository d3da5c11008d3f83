"""CSV tables with exact float round-trip.

Every file is UTF-8 with a header row, comma separators and LF line
endings.  Floats are written with 17 significant digits, which is enough
to recover every binary64 value exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` (an iterable of sequences) under ``header``."""
    path = Path(path)
    header = list(header)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            row = list(row)
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def _parse(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> tuple[list, list]:
    """Header and rows; numeric fields come back as floats."""
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(x) for x in row] for row in reader]
    return header, rows


def read_columns(path) -> dict:
    """Columns keyed by header name; all-numeric columns become float arrays."""
    header, rows = read_csv(path)
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in rows]
        if all(isinstance(v, float) for v in col):
            out[name] = np.array(col, dtype=float)
        else:
            out[name] = col
    return out
