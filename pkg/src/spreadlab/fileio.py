"""Plain-text matrix and graph files.

``BIREG n m s t`` is followed by one ``u r sign`` line per edge, and
``BIGRAPH n m`` by one ``u r`` line per edge.  Indices are 0-based, signs are
written as ``+1``/``-1`` and edges are sorted by ``(u, r)``.
"""
import io

import numpy as np

from .ensemble import BipartiteGraph, SignedBiregularMatrix
from .errors import FileFormatError, InvalidParams


def _read_header(fh, magic, nfields):
    line = fh.readline()
    parts = line.split()
    if not parts or parts[0] != magic or len(parts) != nfields + 1:
        raise FileFormatError(f"expected header '{magic}' with {nfields} integers, got {line.strip()!r}")
    try:
        return [int(p) for p in parts[1:]]
    except ValueError as exc:
        raise FileFormatError(f"bad header {line.strip()!r}") from exc


def _read_body(fh, ncols):
    text = fh.read()
    if not text.strip():
        return np.zeros((0, ncols), np.int64)
    try:
        data = np.loadtxt(io.StringIO(text), dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise FileFormatError(f"malformed edge line: {exc}") from exc
    if data.shape[1] != ncols:
        raise FileFormatError(f"edge lines need {ncols} fields, got {data.shape[1]}")
    return data


def _check_sorted(u, r, m):
    key = u * m + r
    if np.any(key[1:] <= key[:-1]):
        raise FileFormatError("edges must be unique and sorted by (u, r)")


def write_matrix(path, A):
    lines = [f"BIREG {A.n} {A.m} {A.s} {A.t}"]
    g = A.graph
    lines.extend(f"{u} {r} {'+1' if sg > 0 else '-1'}"
                 for u, r, sg in zip(g.left.tolist(), g.right.tolist(), A.signs.tolist()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path):
    with open(path) as fh:
        n, m, s, t = _read_header(fh, "BIREG", 4)
        data = _read_body(fh, 3)
    u, r, sg = data[:, 0], data[:, 1], data[:, 2]
    if u.size != n * t or n * t != m * s:
        raise FileFormatError(f"{u.size} edges do not fit BIREG {n} {m} {s} {t}")
    if np.any((sg != 1) & (sg != -1)):
        raise FileFormatError("signs must be +1 or -1")
    _check_sorted(u, r, m)
    try:
        g = BipartiteGraph(n, m, u, r, presorted=True)
        return SignedBiregularMatrix(g, sg, s, t)
    except InvalidParams as exc:
        raise FileFormatError(str(exc)) from exc


def write_graph(path, G):
    lines = [f"BIGRAPH {G.n_left} {G.n_right}"]
    lines.extend(f"{u} {r}" for u, r in zip(G.left.tolist(), G.right.tolist()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path):
    with open(path) as fh:
        n, m = _read_header(fh, "BIGRAPH", 2)
        data = _read_body(fh, 2)
    _check_sorted(data[:, 0], data[:, 1], m)
    try:
        return BipartiteGraph(n, m, data[:, 0], data[:, 1], presorted=True)
    except InvalidParams as exc:
        raise FileFormatError(str(exc)) from exc
