"""Deterministic CSV/JSON writers and the synthetic-data reader."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORWARD_COLUMNS = ("node_index", "x", "y", "re_u", "im_u")
MANIFEST = "manifest.json"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def json_text(payload) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def commit(outputs: dict, out_dir: Path) -> list[Path]:
    """Write a mapping ``relative name -> text`` once every output is ready."""
    written = []
    for name in sorted(outputs):
        p = Path(out_dir) / name
        write_atomic(p, outputs[name])
        written.append(p)
    return written


def forward_csv(points: np.ndarray, u: np.ndarray) -> str:
    rows = ((k, x, y, float(np.real(v)), float(np.imag(v)))
            for k, ((x, y), v) in enumerate(zip(points, u)))
    return csv_text(FORWARD_COLUMNS, rows)


def read_forward_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (points, u) from a synthetic-data file."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FORWARD_COLUMNS:
            raise ValueError(f"{path}: expected columns {FORWARD_COLUMNS}")
        rows = list(reader)
    idx = np.array([int(r["node_index"]) for r in rows])
    if not np.array_equal(idx, np.arange(len(rows))):
        raise ValueError(f"{path}: node_index must run 0..N-1")
    pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    u = np.array([float(r["re_u"]) + 1j * float(r["im_u"]) for r in rows])
    return pts, u


def read_forward_data(data_dir: Path):
    """Load a forward-data directory: (manifest, omegas, u[k, pattern, node])."""
    data_dir = Path(data_dir)
    with open(data_dir / MANIFEST) as fh:
        manifest = json.load(fh)
    omegas = np.asarray(manifest["omegas"], dtype=float)
    files = manifest["files"]
    u = []
    for row in files:
        u.append([read_forward_csv(data_dir / name)[1] for name in row])
    return manifest, omegas, np.array(u)
