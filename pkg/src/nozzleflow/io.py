"""Atomic, deterministic file outputs: CSV tables, JSON reports and field dumps."""

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

FIELD_COLUMNS = ("t1", "t2", "x1", "x2", "psi", "rho", "u", "v", "p", "mach")


def fmt(x):
    """17 significant digits: enough to recover any double exactly."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(doc):
    """Insertion-ordered JSON; non-finite numbers become ``null``."""
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def write_json(path, doc):
    atomic_write_text(path, json_text(doc))


def field_rows(stream_field, flow=None):
    """Rows ``(t1, t2, x1, x2, psi, rho, u, v, p, mach)`` with ``t2`` varying fastest."""
    dom = stream_field.grid
    T1, T2 = dom.nodes
    X1, X2 = dom.physical_nodes
    nan = np.full(dom.shape, np.nan)
    cols = [T1, T2, X1, X2, stream_field.values]
    if flow is None:
        cols += [nan] * 5
    else:
        cols += [flow.rho, flow.u, flow.v, flow.p, flow.mach]
    return np.column_stack([np.asarray(c, float).ravel() for c in cols])


def write_field(path, stream_field, flow=None):
    write_csv(path, FIELD_COLUMNS, field_rows(stream_field, flow))


def read_field(path):
    """Parse a field dump back into ``{column: (nx, ny) array}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    if tuple(header) != FIELD_COLUMNS:
        raise ValueError(f"unexpected field header {header}")
    ny = int(np.argmax(data[1:, 0] != data[0, 0])) + 1 if data.shape[0] > 1 else 1
    nx = data.shape[0] // ny
    if nx * ny != data.shape[0]:
        raise ValueError("field dump is not a full tensor grid")
    return {name: data[:, k].reshape(nx, ny) for k, name in enumerate(header)}
