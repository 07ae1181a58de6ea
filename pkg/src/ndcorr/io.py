"""CSV and JSON persistence.  Every CSV gets a header and a JSON sidecar."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .solver import Trace


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, columns, sidecar: dict | None = None) -> Path:
    """Write equal-length columns with a header row; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in zip(*cols):
            out.writerow([_fmt(v) for v in row])
    if sidecar is not None:
        write_json(path.with_suffix(".json"), sidecar)
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    return path


def provenance(config_hash: str, stage: str, **extra) -> dict:
    return {"config_hash": config_hash, "stage": stage, "version": __version__, **extra}


def write_trace(path, tr: Trace, sidecar: dict | None = None) -> Path:
    return write_csv(path, ["t", "value"], [tr.times, tr.samples], sidecar)


def read_trace(path) -> Trace:
    d = read_csv(path)
    t = d["t"]
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    return Trace(float(t[0]), dt, d["value"])
