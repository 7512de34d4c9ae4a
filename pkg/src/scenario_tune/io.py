"""Canonical serialization helpers.

JSON is written with sorted keys and Python's shortest round-trip float repr,
CSV with ``,`` separators and ``\\n`` line endings, so equal content gives
equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def to_plain(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON-friendly python types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8", newline="\n")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def hash_obj(obj) -> str:
    return sha256_bytes(json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False).encode())


def fmt_float(x: float) -> str:
    return repr(float(x))


def write_matrix_csv(path, M: np.ndarray) -> None:
    lines = [",".join(fmt_float(v) for v in row) for row in np.asarray(M, dtype=float)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = [line.split(",") for line in Path(path).read_text(encoding="utf-8").splitlines() if line]
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def write_rows_csv(path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_rows_csv(path) -> tuple[list, list]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]
