"""JSON matrix files and CSV/JSON tables.

Matrix file::

    {"schema_version": 1, "kind": "matrix", "shape": [4, 4],
     "triplets": [[row, col, re, im], ...]}

A pure state may be given instead as ``{"schema_version": 1, "kind": "ket",
"entries": [[re, im], ...]}`` and is read as its projector. Floats are written
with ``repr`` precision, so a matrix survives a write/read cycle bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .lindblad import SCHEMA_VERSION, ModelError, matrix_from_triplets, matrix_to_triplets

OUTPUT_ENV = "MULTISTABLE_OUTPUT_DIR"


class FormatError(ModelError):
    """A data file does not match its documented schema."""


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def matrix_to_dict(m) -> dict:
    m = np.asarray(m.toarray() if hasattr(m, "toarray") else m, dtype=complex)
    return {"schema_version": SCHEMA_VERSION, "kind": "matrix", "shape": list(m.shape),
            "triplets": matrix_to_triplets(m)}


def matrix_from_dict(doc) -> np.ndarray:
    if not isinstance(doc, dict):
        raise FormatError("matrix document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {doc.get('schema_version')!r}")
    kind = doc.get("kind", "matrix")
    try:
        if kind == "ket":
            v = np.array([complex(float(re), float(im)) for re, im in doc["entries"]])
            if v.size == 0:
                raise FormatError("empty ket")
            return np.outer(v, v.conj())
        if kind != "matrix":
            raise FormatError(f"unknown kind {kind!r}")
        rows, cols = (int(x) for x in doc["shape"])
        if rows != cols:
            raise FormatError(f"expected a square matrix, got shape {[rows, cols]}")
        return matrix_from_triplets(doc["triplets"], rows).toarray()
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed matrix document: {exc}") from exc


def write_matrix(m, path) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(m), indent=1))


def read_matrix(path) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return matrix_from_dict(doc)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_json(doc: dict, path) -> None:
    out = {"schema_version": SCHEMA_VERSION}
    out.update(doc)
    Path(path).write_text(json.dumps(_jsonable(out), indent=1))


def write_csv(rows: list[dict], path, columns: list[str] | None = None) -> None:
    """One row per dict; the header comes from ``columns`` or the first row."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
