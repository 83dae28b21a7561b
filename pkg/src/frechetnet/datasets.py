"""Plain-text dataset and prediction files.

A dataset file is CSV with one metadata line in front::

    # frechetnet-dataset v1 space=wasserstein dim=100 p=10 n=200
    x1,...,x10,y1,...,y100
    <one record per row>

Responses are written flattened in point order (quantile values, Laplacian
entries row by row, shares, or coordinates).  Floats use ``repr`` so a file
read back reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import io

import numpy as np

from .errors import DimensionError, FormatError
from .spaces import make_space

DATASET_TAG = "# frechetnet-dataset v1"
PREDICTION_TAG = "# frechetnet-predictions v1"


def _meta_line(tag, **fields):
    return " ".join([tag] + [f"{k}={v}" for k, v in fields.items()])


def _parse_meta(line, tag):
    line = line.rstrip("\r\n")
    if not line.startswith(tag):
        raise FormatError(f"expected a first line starting with {tag!r}")
    out = {}
    for tok in line[len(tag):].split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(f"malformed metadata token {tok!r}")
        out[key] = value
    return out


def _fmt(v):
    return repr(float(v))


def _rows_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def dataset_text(X, Y, space) -> str:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    p, k = X.shape[1], Y.shape[1]
    meta = _meta_line(DATASET_TAG, space=space.kind, dim=space.dim, p=p, n=len(X))
    header = [f"x{j}" for j in range(1, p + 1)] + [f"y{j}" for j in range(1, k + 1)]
    return meta + "\n" + _rows_text(header, np.hstack([X, Y]))


def write_dataset(path, X, Y, space) -> str:
    """Write a dataset file and return its SHA-256 hex digest."""
    text = dataset_text(X, Y, space)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def read_dataset(path):
    """Return ``(X, Y, space)``; ``Y`` has the space's point shape per row."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        meta = _parse_meta(first, DATASET_TAG)
        rows = [r for r in csv.reader(fh) if r]
    try:
        space = make_space(meta["space"], int(meta["dim"]))
        p = int(meta["p"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad dataset metadata: {exc}") from exc
    if not rows:
        raise FormatError("dataset has no column header")
    width = p + space.embed_dim
    if len(rows[0]) != width:
        raise FormatError(f"expected {width} columns, header has {len(rows[0])}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, width)
    except ValueError as exc:
        raise FormatError(f"non-numeric or ragged record: {exc}") from exc
    if "n" in meta and int(meta["n"]) != len(data):
        raise FormatError(f"metadata says n={meta['n']} but found {len(data)} records")
    X = data[:, :p]
    Y = data[:, p:].reshape((-1,) + space.point_shape)
    return X, Y, space


def read_inputs(path, p=None):
    """Predictor matrix from a CSV with a header row; an empty file gives zero rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        return np.empty((0, p or 0))
    body = rows[1:]
    ncol = len(rows[0])
    if p is not None and ncol != p:
        raise DimensionError(f"inputs have {ncol} columns, the model expects p={p}")
    try:
        return np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, ncol)
    except ValueError as exc:
        raise FormatError(f"non-numeric or ragged input row: {exc}") from exc


def write_inputs(path, X):
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_rows_text([f"x{j}" for j in range(1, X.shape[1] + 1)], X))


def write_predictions(path, points, space):
    points = np.asarray(points, dtype=float).reshape(-1, space.embed_dim)
    meta = _meta_line(PREDICTION_TAG, space=space.kind, dim=space.dim, n=len(points))
    header = [f"y{j}" for j in range(1, space.embed_dim + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(meta + "\n" + _rows_text(header, points))


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        meta = _parse_meta(fh.readline(), PREDICTION_TAG)
        rows = [r for r in csv.reader(fh) if r]
    space = make_space(meta["space"], int(meta["dim"]))
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    return data.reshape((-1,) + space.point_shape), space
