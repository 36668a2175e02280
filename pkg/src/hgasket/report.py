"""Table serialization: CSV (header row, LF) and JSONL (one object per row).

Floats use Python's shortest round-trip representation, so identical runs
give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

FORMATS = ("csv", "jsonl")


def _plain(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _cell(value) -> str:
    value = _plain(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_rows(rows: list[dict], fmt: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "jsonl":
        return "".join(json.dumps({k: _plain(v) for k, v in row.items()}) + "\n" for row in rows)
    buf = io.StringIO()
    if rows:
        header = list(rows[0])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in header])
    return buf.getvalue()


def write_table(rows: list[dict], out_dir: Path, name: str, fmt: str) -> Path:
    path = Path(out_dir) / f"{name}.{fmt}"
    path.write_text(render_rows(rows, fmt), encoding="utf-8", newline="\n")
    return path


def read_table(path: Path) -> list[dict]:
    """Parse a table written by ``write_table``; CSV values come back as strings."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in text.splitlines() if line]
    return list(csv.DictReader(io.StringIO(text)))
