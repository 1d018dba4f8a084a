"""Plain-text file formats: group-element matrices, CSV tables, JSON documents.

Matrix format::

    n <dim> <field>
    <row 0>
    ...
    <row dim-1>

with whitespace-separated decimals; complex entries are written as adjacent
``re im`` pairs. Numbers use 17 significant digits, which round-trips
float64 exactly.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .geometry import COMPLEX, REAL

FLOAT_FORMAT = "{:.17g}"


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    if value is None:
        return ""
    return str(value)


def write_matrix(path, a: np.ndarray) -> None:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    field = COMPLEX if np.iscomplexobj(a) else REAL
    lines = [f"n {a.shape[0]} {field}"]
    for row in a:
        if field == COMPLEX:
            parts = [FLOAT_FORMAT.format(v) for z in row for v in (z.real, z.imag)]
        else:
            parts = [FLOAT_FORMAT.format(v) for v in row]
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "n" or head[2] not in (REAL, COMPLEX):
        raise ValueError(f"{path}: bad header {lines[0]!r}; expected 'n <dim> real|complex'")
    n = int(head[1])
    rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    width = 2 * n if head[2] == COMPLEX else n
    if len(rows) != n or any(len(r) != width for r in rows):
        raise ValueError(f"{path}: expected {n} rows of {width} numbers")
    a = np.array(rows)
    if head[2] == COMPLEX:
        return a[:, 0::2] + 1j * a[:, 1::2]
    return a


def read_matrix_dir(directory) -> np.ndarray:
    """All ``*.txt`` matrices in ``directory`` (sorted by file name) as a stack."""
    files = sorted(Path(directory).glob("*.txt"))
    if not files:
        raise ValueError(f"{directory}: no matrix files (*.txt)")
    return np.stack([read_matrix(f) for f in files])


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_number(v) for v in row])


def read_points_csv(path, labels: bool = False):
    """Point cloud CSV: one row per point, optional leading label column, optional header."""
    pts, names = [], []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            body = row[1:] if labels else row
            try:
                values = [float(v) for v in body]
            except ValueError:
                if k == 0:
                    continue  # header
                raise
            pts.append(values)
            if labels:
                names.append(row[0])
    return np.array(pts), (tuple(names) if labels else None)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
