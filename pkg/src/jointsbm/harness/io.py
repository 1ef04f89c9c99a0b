"""Reading and writing graphs and labels, plus the real-data preprocessing.

Formats
-------
dense_csv
    ``n`` comma-separated rows of ``n`` numbers each.
edge_list_tsv
    One ``i<TAB>j<TAB>weight`` line per undirected pair, 0-based indices.
    Lines starting with ``#`` are skipped. Pairs not listed have weight 0.
label files
    One 1-based integer per line, vertex order.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "load_adjacency",
    "save_dense",
    "preprocess_correlation",
    "preprocess_counts",
    "read_labels",
    "write_labels",
    "write_json",
]

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _load_dense(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"{path}: ragged CSV, row {k} has {len(r)} fields, expected {width}")
    return np.array(rows)


def _load_edges(path, n):
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 'i j weight', got {line!r}")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            edges.append((lineno, i, j, w))
    if n is None:
        n = 1 + max((max(i, j) for _, i, j, _ in edges), default=-1)
    A = np.zeros((n, n))
    seen = set()
    for lineno, i, j, w in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"{path}:{lineno}: index out of range for n={n}: ({i}, {j})")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate pair {key}")
        seen.add(key)
        A[i, j] = A[j, i] = w
    return A


def load_adjacency(path, format="dense_csv", n=None, sym_tol=1e-9):
    """Load a symmetric weight matrix; nonzero diagonals are zeroed with a warning."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if format == "dense_csv":
        A = _load_dense(path)
        if A.shape[0] != A.shape[1]:
            raise DataError(f"{path}: matrix is {A.shape[0]}x{A.shape[1]}, not square")
        if n is not None and A.shape[0] != n:
            raise DataError(f"{path}: expected n={n}, found {A.shape[0]}")
        diff = np.abs(A - A.T)
        bad = np.argwhere(np.triu(diff > sym_tol, 1))
        if len(bad):
            i, j = bad[0]
            raise DataError(f"{path}: asymmetric input at ({i}, {j}): "
                            f"{A[i, j]!r} != {A[j, i]!r}")
        A = 0.5 * (A + A.T)
    elif format == "edge_list_tsv":
        A = _load_edges(path, n)
    else:
        raise DataError(f"unknown adjacency format {format!r}")
    if np.any(np.diag(A) != 0):
        logger.warning("%s: nonzero diagonal entries set to 0", path)
        np.fill_diagonal(A, 0.0)
    return A


def save_dense(path, A):
    A = np.asarray(A, dtype=float)
    with open(path, "w") as fh:
        for row in A:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x):
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _check_square_symmetric(M, tol=1e-9, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError(f"{name} must be square, got shape {M.shape}")
    if np.abs(M - M.T).max(initial=0.0) > tol:
        raise DataError(f"{name} must be symmetric")
    return M


def preprocess_correlation(M, threshold="mean"):
    """Binary graph keeping pairs whose value is strictly above the threshold.

    ``threshold="mean"`` uses the mean over off-diagonal entries; a number
    is used as given.
    """
    M = _check_square_symmetric(M, name="correlation matrix")
    n = M.shape[0]
    off = ~np.eye(n, dtype=bool)
    if isinstance(threshold, str):
        if threshold != "mean":
            raise ValueError(f"unknown threshold {threshold!r}")
        vals = M[off]
        # exact summation, clipped so a constant input keeps its own value
        t = min(max(math.fsum(vals) / vals.size, vals.min()), vals.max()) if n > 1 else 0.0
    else:
        t = float(threshold)
    A = (M > t).astype(float)
    np.fill_diagonal(A, 0.0)
    return A


def preprocess_counts(matrices):
    """Entrywise mean over the matrices, rounded half up to nonnegative integers."""
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if not mats:
        raise DataError("need at least one count matrix")
    shape = mats[0].shape
    for k, m in enumerate(mats):
        if m.shape != shape:
            raise DataError(f"matrix {k} has shape {m.shape}, expected {shape}")
    mean = np.mean(mats, axis=0)
    _check_square_symmetric(mean, name="mean count matrix")
    out = np.floor(mean + 0.5)
    if np.any(out < 0):
        logger.warning("negative averaged counts clamped to 0")
        out = np.maximum(out, 0.0)
    np.fill_diagonal(out, 0.0)
    return out


def read_labels(path):
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: not an integer label: {line!r}") from None
    return np.array(labels, dtype=np.int64)


def write_labels(path, labels, one_based=True):
    """Write 0-based labels shifted to 1-based, one per line."""
    offset = 1 if one_based else 0
    with open(path, "w") as fh:
        for g in np.asarray(labels, dtype=np.int64):
            fh.write(f"{int(g) + offset}\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
