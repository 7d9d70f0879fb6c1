"""Plain-text artifacts: comma-separated data files and JSON documents."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def to_jsonable(x):
    """``json.dumps`` fallback for numpy scalars and arrays."""
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _string_keys(obj):
    """Stringify mapping keys so documents with numeric keys (e.g. per-mu tables) sort cleanly."""
    if isinstance(obj, dict):
        return {str(k): _string_keys(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_string_keys(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_string_keys(obj), indent=2, sort_keys=True, default=to_jsonable) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_csv(path, columns: dict) -> Path:
    """One header row, then one row per sample; no spaces, so gnuplot reads it with ``set datafile separator ','``."""
    path = Path(path)
    names = list(columns)
    if not names:
        raise ValueError("no columns to write")
    cols = [np.ravel(np.asarray(columns[k], dtype=float)) for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) != 1:
        raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    return path


def read_csv(path) -> dict:
    """Inverse of :func:`write_csv`."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


PLOT_SCHEMAS = {
    "norm_trace": ("t", "l1", "l2", "linf"),
    "kernel_profile": ("z", "k", "H", "I", "k_over_H"),
    "m_ladder": ("M", "defect", "delta_p1", "delta_p2", "delta_pinf"),
    "omega": ("p", "omega"),
    "criterion": ("r", "inf_value"),
}


def emit_plot_data(table: dict, kind: str, path) -> Path:
    """Write one curve as CSV after checking its columns against the schema for ``kind``."""
    if kind not in PLOT_SCHEMAS:
        raise ValueError(f"unknown plot data kind {kind!r}; expected one of {sorted(PLOT_SCHEMAS)}")
    expected = PLOT_SCHEMAS[kind]
    if tuple(table) != expected:
        raise ValueError(f"{kind} needs columns {expected}, got {tuple(table)}")
    return write_csv(path, table)
