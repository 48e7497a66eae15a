"""CSV traces with a fixed 17-significant-digit float format."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if isinstance(value, (tuple, list, np.ndarray)):
        return " ".join(fmt(v) for v in np.asarray(value).ravel().tolist())
    return str(value)


def render_csv(columns, rows, meanings: dict | None = None) -> str:
    """CSV text: a '#' comment row naming the object behind each column, then header and rows."""
    buf = io.StringIO()
    if meanings:
        buf.write("# " + "; ".join(f"{c}: {meanings[c]}" for c in columns if c in meanings) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows, meanings: dict | None = None) -> str:
    text = render_csv(columns, rows, meanings)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text
