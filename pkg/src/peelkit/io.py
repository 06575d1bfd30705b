"""CSV and JSON input/output.

Floats are written as decimal text with 17 significant digits so that
every 64-bit value round-trips exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .metric import MetricError, validate_distance_matrix


class InputError(ValueError):
    """Malformed input file."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent: int | None = 1) -> str:
    """JSON text with floats at 17 significant digits."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(k) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(fmt(v) for v in o) + "]"
            return "[" + ",".join(pad + enc(v, level + 1) for v in o) + end + "]"
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, float)):
            return fmt(o)
        return json.dumps(o if isinstance(o, str) else str(o))

    return enc(_plain(obj), 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (int, float, np.number, np.bool_)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    Path(path).write_text(format_csv(header, rows))


def _read_rows(path) -> list[list[float]]:
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data")
    out = []
    for i, r in enumerate(rows):
        try:
            out.append([float(c) for c in r])
        except ValueError:
            if i == 0:  # header line
                continue
            raise InputError(f"{path}: non-numeric entry on line {i + 1}") from None
    if not out:
        raise InputError(f"{path}: no numeric rows")
    width = len(out[0])
    if any(len(r) != width for r in out):
        raise InputError(f"{path}: ragged rows")
    return out


def read_points_csv(path) -> np.ndarray:
    """N rows by m columns of coordinates; an optional header line is skipped."""
    return np.array(_read_rows(path), dtype=float)


def read_matrix_csv(path) -> np.ndarray:
    """Square distance matrix; raises InputError when not square or not a valid metric matrix."""
    d = np.array(_read_rows(path), dtype=float)
    if d.shape[0] != d.shape[1]:
        raise InputError(f"{path}: matrix is {d.shape[0]} x {d.shape[1]}, not square")
    try:
        return validate_distance_matrix(d)
    except MetricError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_matrix_csv(path, d) -> None:
    write_csv(path, None, np.asarray(d).tolist())


def write_edges_csv(path, graph) -> None:
    rows = [(int(j), int(k), float(w)) for (j, k), w in zip(graph.edges, graph.weights)]
    write_csv(path, ["j", "k", "weight"], rows)


def read_edges_csv(path):
    from .graphs import WeightedGraph

    rows = _read_rows(path)
    arr = np.array(rows, dtype=float)
    if arr.shape[1] != 3:
        raise InputError(f"{path}: edge list needs columns j, k, weight")
    edges = arr[:, :2].astype(int)
    if np.any(arr[:, :2] != edges):
        raise InputError(f"{path}: vertex ids must be integers")
    n = int(edges.max()) + 1 if edges.size else 0
    return WeightedGraph(n, edges, arr[:, 2])
