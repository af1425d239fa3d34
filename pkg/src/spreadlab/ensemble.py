"""Signed biregular matrices stored as bipartite graphs, and their sampler.

Left vertices are columns (degree ``t``), right vertices are rows (degree
``s``).  Edge arrays are kept sorted by ``(left, right)``; every derived
structure is computed from them and frozen.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InvalidParams, SamplingFailure


@dataclass(frozen=True)
class EnsembleParams:
    """Shape of an (s, t)-biregular ``m x n`` matrix plus the RNG seed."""

    n: int
    m: int
    s: int
    t: int
    seed: int = 0

    def __post_init__(self):
        n, m, s, t = self.n, self.m, self.s, self.t
        if min(n, m, s, t) < 1:
            raise InvalidParams(f"n, m, s, t must be positive, got {(n, m, s, t)}")
        if n * t != m * s:
            raise InvalidParams(f"n*t = {n * t} differs from m*s = {m * s}")
        if s > n or t > m:
            raise InvalidParams(f"no simple graph with s={s} > n={n} or t={t} > m={m}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams(f"seed must fit in 64 bits, got {self.seed}")

    @property
    def alpha(self):
        return self.m / self.n

    @property
    def n_edges(self):
        return self.n * self.t

    def in_asymptotic_regime(self):
        """True when ``t >= 3``, ``s >= t`` and ``m < n``."""
        return self.t >= 3 and self.s >= self.t and self.m < self.n

    @classmethod
    def from_alpha(cls, n, alpha, s, seed=0):
        """Resolve ``m = alpha*n`` and ``t = alpha*s`` to integers, or explain what would work."""
        a = Fraction(alpha).limit_denominator(10**6)
        m, t = a * n, a * s
        if m.denominator == 1 and t.denominator == 1 and 0 < a <= 1:
            return cls(n=n, m=int(m), s=s, t=int(t), seed=seed)
        hint = _nearest_realizable(n, a, s)
        raise InvalidParams(
            f"alpha={alpha} with n={n}, s={s} gives non-integer m={float(m)} or t={float(t)}"
            + (f"; nearest realizable: n={hint[0]}, s={hint[1]}, alpha={hint[2]}" if hint else "")
        )


def _nearest_realizable(n, a, s):
    q = a.denominator
    cands = []
    for nn in (n - n % q, n - n % q + q):
        for ss in (s - s % q, s - s % q + q):
            if nn > 0 and ss > 0:
                cands.append((abs(nn - n) + abs(ss - s), nn, ss))
    if not cands:
        return None
    _, nn, ss = min(cands)
    return nn, ss, str(a)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class BipartiteGraph:
    """A simple bipartite graph with edges sorted by ``(left, right)``.

    Adjacency is held in CSR form in both directions.  Edge ``e`` has
    endpoints ``left[e]`` and ``right[e]``; ``right_edges`` lists edge ids
    grouped by right vertex (ascending left index inside each group).
    """

    def __init__(self, n_left, n_right, left, right, *, presorted=False, check=True):
        self.n_left = int(n_left)
        self.n_right = int(n_right)
        left = np.asarray(left, dtype=np.int64).ravel()
        right = np.asarray(right, dtype=np.int64).ravel()
        if left.shape != right.shape:
            raise InvalidParams("left and right endpoint arrays differ in length")
        if not presorted:
            order = np.lexsort((right, left))
            left, right = left[order], right[order]
        if check:
            if left.size and (left.min() < 0 or left.max() >= self.n_left
                              or right.min() < 0 or right.max() >= self.n_right):
                raise InvalidParams("edge endpoint out of range")
            key = left * self.n_right + right
            if np.any(key[1:] <= key[:-1]):
                raise InvalidParams("edge list has repeated (left, right) pairs or is unsorted")
        self.left = np.ascontiguousarray(left)
        self.right = np.ascontiguousarray(right)
        self.left_ptr = np.zeros(self.n_left + 1, np.int64)
        np.cumsum(np.bincount(self.left, minlength=self.n_left), out=self.left_ptr[1:])
        _freeze(self.left, self.right, self.left_ptr)

    @property
    def n_edges(self):
        return self.left.size

    @property
    def edges(self):
        return np.stack([self.left, self.right], axis=1)

    @cached_property
    def left_degrees(self):
        d = np.diff(self.left_ptr)
        _freeze(d)
        return d

    @cached_property
    def right_degrees(self):
        d = np.bincount(self.right, minlength=self.n_right).astype(np.int64)
        _freeze(d)
        return d

    @cached_property
    def right_edges(self):
        e = np.argsort(self.right, kind="stable").astype(np.int64)
        _freeze(e)
        return e

    @cached_property
    def right_ptr(self):
        p = np.zeros(self.n_right + 1, np.int64)
        np.cumsum(self.right_degrees, out=p[1:])
        _freeze(p)
        return p

    @cached_property
    def right_nbrs(self):
        """Left endpoints grouped by right vertex (CSR values for ``right_ptr``)."""
        a = self.left[self.right_edges]
        _freeze(a)
        return a

    def left_neighbors(self, u):
        return self.right[self.left_ptr[u]:self.left_ptr[u + 1]]

    def right_neighbors(self, r):
        return self.right_nbrs[self.right_ptr[r]:self.right_ptr[r + 1]]

    def neighbor_table(self):
        """``(n_left, t)`` array of right neighbors; requires a left-regular graph."""
        d = self.left_degrees
        if self.n_left and np.any(d != d[0]):
            raise InvalidParams("neighbor_table needs equal left degrees")
        t = int(d[0]) if self.n_left else 0
        return self.right.reshape(self.n_left, t)

    def edge_index(self, u, r):
        """Edge ids of the pairs ``(u[i], r[i])``; ``-1`` where absent."""
        return kernels.edge_lookup(self.left_ptr, self.right, np.atleast_1d(u), np.atleast_1d(r))

    def __eq__(self, other):
        return (isinstance(other, BipartiteGraph) and self.n_left == other.n_left
                and self.n_right == other.n_right and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right))

    __hash__ = None

    def __repr__(self):
        return f"BipartiteGraph(n_left={self.n_left}, n_right={self.n_right}, n_edges={self.n_edges})"


class SignedBipartiteMatrix:
    """An ``n_right x n_left`` {0, +-1} matrix given by a graph and one sign per edge."""

    DENSE_LIMIT = 64

    def __init__(self, graph, signs):
        signs = np.asarray(signs, dtype=np.int8).ravel()
        if signs.size != graph.n_edges:
            raise InvalidParams(f"{signs.size} signs for {graph.n_edges} edges")
        if not np.all(np.abs(signs) == 1):
            raise InvalidParams("signs must be +1 or -1")
        self.graph = graph
        self.signs = np.ascontiguousarray(signs)
        _freeze(self.signs)

    @property
    def n(self):
        return self.graph.n_left

    @property
    def m(self):
        return self.graph.n_right

    @property
    def shape(self):
        return (self.m, self.n)

    def sign(self, u, r):
        e = self.graph.edge_index(u, r)
        if np.any(e < 0):
            raise KeyError(f"({u}, {r}) is not an edge")
        return self.signs[e]

    def to_dense(self):
        D = np.zeros((self.m, self.n))
        D[self.graph.right, self.graph.left] = self.signs
        return D

    @cached_property
    def dense(self):
        """Dense copy, kept only for matrices with ``n <= DENSE_LIMIT``."""
        if self.n > self.DENSE_LIMIT:
            raise InvalidParams(f"dense copy is reserved for n <= {self.DENSE_LIMIT}")
        D = self.to_dense()
        _freeze(D)
        return D

    def to_csr(self):
        from scipy import sparse

        return sparse.csr_matrix(
            (self.signs.astype(np.float64), (self.graph.right, self.graph.left)), shape=self.shape
        )

    def __matmul__(self, x):
        return apply(self, x)

    def __eq__(self, other):
        return (isinstance(other, SignedBipartiteMatrix) and self.graph == other.graph
                and np.array_equal(self.signs, other.signs))

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, n={self.n}, nnz={self.graph.n_edges})"


class SignedBiregularMatrix(SignedBipartiteMatrix):
    """Signed matrix with exactly ``t`` nonzeros per column and ``s`` per row."""

    def __init__(self, graph, signs, s, t):
        super().__init__(graph, signs)
        self.s, self.t = int(s), int(t)
        if np.any(graph.left_degrees != self.t):
            raise InvalidParams(f"left degrees are not all {self.t}")
        if np.any(graph.right_degrees != self.s):
            raise InvalidParams(f"right degrees are not all {self.s}")

    @property
    def params(self):
        return (self.n, self.m, self.s, self.t)


@dataclass(frozen=True)
class SparseVector:
    """Sorted ``(index, value)`` pairs of a vector in ``R^dim``, no stored zeros."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values).ravel()
        if idx.shape != val.shape:
            raise InvalidParams("indices and values differ in length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0)):
            raise InvalidParams("indices must be strictly increasing and inside [0, dim)")
        if np.any(val == 0):
            raise InvalidParams("sparse vectors store no zeros")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x)
        idx = np.flatnonzero(x)
        return cls(x.size, idx, x[idx])

    def to_dense(self, dtype=None):
        out = np.zeros(self.dim, dtype=dtype or self.values.dtype)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self):
        return self.indices.size


def sample_biregular(params, burn_in=None, chunk=None):
    """Draw a signed (s, t)-biregular matrix.

    Uses the configuration model, removes repeated edges with random
    double-edge swaps (giving up after ``100 |E|`` rejected swaps), then runs
    ``burn_in`` further swaps (default ``10 |E|``).  Signs are i.i.d. uniform
    and assigned in sorted edge order, so the output depends only on
    ``params`` and the backend-independent random stream.
    """
    n, m, s, t = params.n, params.m, params.s, params.t
    E = n * t
    rng = np.random.default_rng(params.seed)
    right = rng.permutation(np.repeat(np.arange(m, dtype=np.int64), s))
    max_fail = 100 * E
    chunk = chunk or max(1024, E // 8)
    pos, failures = 0, 0
    while True:
        partners = rng.integers(0, E, size=chunk)
        status, pos, _, failures = kernels.repair_swaps(right, t, partners, pos, failures, max_fail)
        if status == 0:
            break
        if status == 2:
            raise SamplingFailure(
                f"could not remove repeated edges after {failures} rejected swaps "
                f"(n={n}, m={m}, s={s}, t={t}, seed={params.seed})"
            )
    burn = 10 * E if burn_in is None else int(burn_in)
    block = 1 << 20
    for start in range(0, burn, block):
        pairs = rng.integers(0, E, size=(min(block, burn - start), 2))
        kernels.mix_swaps(right, t, pairs)
    right = np.sort(right.reshape(n, t), axis=1).ravel()
    left = np.repeat(np.arange(n, dtype=np.int64), t)
    signs = (2 * rng.integers(0, 2, size=E) - 1).astype(np.int8)
    graph = BipartiteGraph(n, m, left, right, presorted=True)
    return SignedBiregularMatrix(graph, signs, s, t)


def _as_dense_input(x, dim):
    if isinstance(x, SparseVector):
        if x.dim != dim:
            raise DimensionMismatch(f"vector has dimension {x.dim}, expected {dim}")
        return x
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionMismatch(f"vector has shape {x.shape}, expected ({dim},)")
    if x.dtype == np.bool_ or not np.issubdtype(x.dtype, np.number):
        x = x.astype(np.float64)
    if np.issubdtype(x.dtype, np.integer):
        x = x.astype(np.int64)
    return x


def apply(A, x):
    """Dense ``A @ x`` of length ``m``.

    Integer input stays integer (exact), anything else is promoted to float64.
    Each output entry is summed over its edges in increasing left index.
    """
    g = A.graph
    x = _as_dense_input(x, A.n)
    if isinstance(x, SparseVector) and x.nnz * 8 >= A.n:
        # a dense pass over all edges is cheaper than gathering most of them
        x = x.to_dense()
    if isinstance(x, SparseVector):
        starts = g.left_ptr[x.indices]
        counts = g.left_ptr[x.indices + 1] - starts
        own = np.repeat(np.arange(x.nnz), counts)
        e = starts[own] + np.arange(own.size) - np.repeat(np.cumsum(counts) - counts, counts)
        vals = x.values.astype(np.int64 if np.issubdtype(x.values.dtype, np.integer) else np.float64)
        src = np.arange(x.nnz, dtype=np.int64)[own]
        return kernels.edge_matvec(src, g.right[e], A.signs[e], vals, A.m)
    if not np.issubdtype(x.dtype, np.integer):
        x = x.astype(np.float64, copy=False)
    return kernels.edge_matvec(g.left, g.right, A.signs, np.ascontiguousarray(x), A.m)


def apply_transpose(A, z):
    """Dense ``A.T @ z`` of length ``n``."""
    g = A.graph
    z = _as_dense_input(z, A.m)
    if isinstance(z, SparseVector):
        z = z.to_dense()
    if not np.issubdtype(z.dtype, np.integer):
        z = z.astype(np.float64, copy=False)
    return kernels.edge_matvec(g.right, g.left, A.signs, np.ascontiguousarray(z), A.n)


def to_dense(A):
    return A.to_dense()
