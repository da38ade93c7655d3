"""File formats: posets, structured matrices, sample dumps and run manifests."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .algebra import StructuredMatrix
from .poset import Poset, parse_poset

__all__ = [
    "read_poset", "read_matrix", "parse_matrix", "matrix_to_csv", "matrix_to_json",
    "samples_to_csv", "sample_columns", "manifest", "dump_json",
]


class MatrixFormatError(ValueError):
    pass


def read_poset(path) -> Poset:
    return parse_poset(Path(path).read_text())


def _place(poset: Poset, labels: list[str], rows: list[list[float]]) -> StructuredMatrix:
    labels = [str(x) for x in labels]
    if sorted(labels) != sorted(poset.labels):
        raise MatrixFormatError(f"matrix labels {labels} do not match poset labels {list(poset.labels)}")
    arr = np.asarray(rows, dtype=float)
    n = len(labels)
    if arr.shape != (n, n):
        raise MatrixFormatError(f"expected a {n}x{n} matrix, got shape {arr.shape}")
    perm = [labels.index(lab) for lab in poset.labels]
    return StructuredMatrix(poset, arr[np.ix_(perm, perm)])


def parse_matrix(text: str, poset: Poset) -> StructuredMatrix:
    """CSV (header row of labels, then dense rows) or JSON ``{"labels", "matrix"}``.

    Rows may be in any label order; they are mapped to the poset's layout.
    A nonzero entry at an unrelated pair raises StructuralZeroError.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        if "matrix" not in obj:
            raise MatrixFormatError("JSON matrix needs a 'matrix' field")
        labels = obj.get("labels", list(poset.labels))
        return _place(poset, labels, obj["matrix"])
    rows = [r for r in csv.reader(io.StringIO(stripped)) if r]
    if not rows:
        raise MatrixFormatError("empty matrix file")
    header = [c.strip() for c in rows[0]]
    try:
        body = [[float(c) for c in r] for r in rows[1:]]
    except ValueError as exc:
        raise MatrixFormatError(str(exc)) from None
    return _place(poset, header, body)


def read_matrix(path, poset: Poset) -> StructuredMatrix:
    return parse_matrix(Path(path).read_text(), poset)


def matrix_to_csv(m: StructuredMatrix | np.ndarray, poset: Poset) -> str:
    arr = m.entries if isinstance(m, StructuredMatrix) else np.asarray(m)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(poset.labels)
    for row in arr:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def matrix_to_json(m: StructuredMatrix | np.ndarray, poset: Poset) -> dict:
    arr = m.entries if isinstance(m, StructuredMatrix) else np.asarray(m)
    return {"poset_hash": poset.content_hash(), "labels": list(poset.labels),
            "matrix": arr.tolist()}


def sample_columns(poset: Poset) -> list[tuple[int, int]]:
    """Free coordinates (i, j), j <= i, row by row in linear-extension order."""
    rows, cols = np.nonzero(poset.lower_mask)
    return list(zip(rows.tolist(), cols.tolist()))


def samples_to_csv(xs: np.ndarray, poset: Poset) -> str:
    cols = sample_columns(poset)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x[{poset.labels[i]},{poset.labels[j]}]" for i, j in cols])
    idx_r = np.array([c[0] for c in cols])
    idx_c = np.array([c[1] for c in cols])
    for row in xs[:, idx_r, idx_c]:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def manifest(poset: Poset, command: str, **config) -> dict:
    """Everything needed to reproduce an output; contains no timestamps."""
    from . import __version__
    out = {"command": command, "version": __version__,
           "poset": {**poset.to_dict(), "hash": poset.content_hash()}}
    out.update(config)
    return out


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
