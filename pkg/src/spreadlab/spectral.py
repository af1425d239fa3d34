"""Singular values of signed biregular matrices and the nomadic-walk machinery behind their band.

``M = A A^T - s I`` is tied to the nomadic walk matrix ``B`` by

    det(I - zB) = (1-z)^(n(t-1) - m) (1+(t-1)z)^(n-m) det(L(z)),
    L(z) = I - zM + z(t-2) I + z^2 (s-1)(t-1) I,

which is checked numerically here on tiny instances.  Hike enumeration is
exact integer bookkeeping used as a brute-force oracle for trace identities.
"""
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .errors import BudgetExceeded, HypothesisViolated, InvalidParams, NoConvergence, RankDeficient

DENSE_SVD_LIMIT = 2048

# ---------------------------------------------------------------------------
# singular values
# ---------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    sigma_min: float
    sigma_max: float
    method: str
    band_center: float = None
    band_radius_unit: float = None
    slack: float = None
    sum_sq: float = None
    iterations: dict = field(default_factory=dict)

    def to_dict(self):
        return {"sigma_min": self.sigma_min, "sigma_max": self.sigma_max, "method": self.method,
                "slack": self.slack,
                "band": {"center": self.band_center, "unit": self.band_radius_unit}}


def _gram_operator(A):
    C = A.to_csr()
    G = C @ C.T if A.m <= A.n else C.T @ C
    return G.tocsr()


def _smallest_by_inverse(G, tol):
    """Smallest eigenvalue of the SPD matrix ``G`` by shift-invert Lanczos with CG solves."""
    size = G.shape[0]
    counter = {"cg": 0}

    def solve(b):
        x, info = splinalg.cg(G, b, rtol=1e-13, atol=0.0, maxiter=20 * size)
        counter["cg"] += 1
        if info > 0:
            raise NoConvergence("inner CG solve did not converge", iterations=info)
        if info < 0 or not np.all(np.isfinite(x)):
            raise RankDeficient("inner CG solve broke down; A A^T looks singular")
        return x

    op = splinalg.LinearOperator(G.shape, matvec=solve, dtype=np.float64)
    v0 = np.ones(size) / math.sqrt(size)
    try:
        vals = splinalg.eigsh(G, k=1, sigma=0.0, which="LM", OPinv=op, tol=tol, v0=v0,
                              return_eigenvectors=False)
    except splinalg.ArpackNoConvergence as exc:
        raise NoConvergence(f"shift-invert Lanczos did not converge: {exc}") from exc
    return float(vals[0]), counter["cg"]


def singular_extremes(A, method="dense", tol=1e-10):
    """Smallest and largest singular value of ``A`` (over ``min(m, n)`` values).

    ``dense`` computes all singular values; ``iterative`` runs Lanczos on the
    Gram matrix for the top and shift-invert Lanczos with CG solves for the
    bottom.
    """
    sum_sq = None
    iters = {}
    if method == "dense":
        if min(A.m, A.n) > DENSE_SVD_LIMIT:
            raise InvalidParams(f"dense SVD is limited to min(m, n) <= {DENSE_SVD_LIMIT}")
        sv = linalg.svdvals(A.to_dense())
        smin, smax = float(sv[-1]), float(sv[0])
        sum_sq = float(np.sum(sv * sv))
    elif method == "iterative":
        G = _gram_operator(A)
        v0 = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
        try:
            top = splinalg.eigsh(G, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)
        except splinalg.ArpackNoConvergence as exc:
            raise NoConvergence(f"Lanczos for sigma_max did not converge: {exc}") from exc
        low, n_cg = _smallest_by_inverse(G, tol)
        iters["inner_solves"] = n_cg
        smax = math.sqrt(max(float(top[0]), 0.0))
        smin = math.sqrt(max(low, 0.0))
    else:
        raise InvalidParams(f"method must be 'dense' or 'iterative', got {method!r}")
    rep = SpectrumReport(sigma_min=smin, sigma_max=smax, method=method, sum_sq=sum_sq, iterations=iters)
    s, t = getattr(A, "s", None), getattr(A, "t", None)
    if s is not None and t is not None and t > 1:
        rep.band_center = math.sqrt(s - 1)
        rep.band_radius_unit = math.sqrt(t - 1)
        rep.slack = max(abs(smin - rep.band_center), abs(smax - rep.band_center)) / rep.band_radius_unit
    return rep


def shifted_gram(A):
    """``M = A A^T - s I`` as a sparse symmetric matrix with an exactly zero diagonal."""
    C = sparse.csr_matrix((A.signs.astype(np.int64), (A.graph.right, A.graph.left)), shape=A.shape)
    M = (C @ C.T).tocsr() - A.s * sparse.identity(A.m, dtype=np.int64, format="csr")
    M = M.tocsr()
    M.eliminate_zeros()
    if np.any(M.diagonal() != 0):
        raise ArithmeticError("A A^T - sI has a nonzero diagonal; A is not s-right-regular")
    return M


def singular_band_from_gram(s, t, eps):
    """If ``Spec(M)`` lies in ``t-2 +- (2+eps) sqrt((s-1)(t-1))``, the interval holding ``sigma(A)``.

    Returns ``(lo, hi, eps_prime)`` with ``sigma(A)`` inside
    ``[lo, hi] = sqrt(s-1) +- (1+eps_prime) sqrt(t-1)`` at worst.
    """
    r = (2 + eps) * math.sqrt((s - 1) * (t - 1))
    lo = math.sqrt(max(s + t - 2 - r, 0.0))
    hi = math.sqrt(s + t - 2 + r)
    c, u = math.sqrt(s - 1), math.sqrt(t - 1)
    eps_prime = max(c - lo, hi - c) / u - 1
    return lo, hi, eps_prime


# ---------------------------------------------------------------------------
# nomadic walk matrix
# ---------------------------------------------------------------------------


@dataclass
class NomadicWalkMatrix:
    """``index[i] = (u, v, w)``: the pair of edges ``{u,v}, {v,w}`` with rights ``u != w`` and left ``v``."""

    index: np.ndarray
    B: sparse.csr_matrix
    edge_pairs: np.ndarray = None

    @property
    def size(self):
        return self.index.shape[0]


def nomadic_pairs(G):
    """All nomadic pairs ``(u, v, w)`` with their edge ids, ordered by ``v`` then adjacency order."""
    idx, eids = [], []
    for v in range(G.n_left):
        lo, hi = int(G.left_ptr[v]), int(G.left_ptr[v + 1])
        for e1 in range(lo, hi):
            for e2 in range(lo, hi):
                if e1 != e2:
                    idx.append((int(G.right[e1]), v, int(G.right[e2])))
                    eids.append((e1, e2))
    return np.array(idx, np.int64).reshape(-1, 3), np.array(eids, np.int64).reshape(-1, 2)


def _nomadic_structure(G):
    """Pairs plus the nonzero pattern ``(row, col, e3, e4)`` of the nomadic matrix."""
    idx, eids = nomadic_pairs(G)
    by_start = {}
    for j, (u, v, w) in enumerate(idx.tolist()):
        by_start.setdefault(u, []).append(j)
    rows, cols = [], []
    for i, (u, v, w) in enumerate(idx.tolist()):
        for j in by_start.get(w, []):
            if idx[j, 1] != v:
                rows.append(i)
                cols.append(j)
    rows = np.array(rows, np.int64)
    cols = np.array(cols, np.int64)
    return idx, eids, rows, cols


def nomadic_matrix(A, budget=10**6):
    """Signed nomadic walk matrix: entry ``sign(e3) sign(e4)`` when ``e1 e2 e3 e4`` is non-backtracking."""
    G = A.graph
    n_pairs = int(np.sum(G.left_degrees * (G.left_degrees - 1)))
    if n_pairs > budget:
        raise BudgetExceeded(f"{n_pairs} nomadic pairs exceed the budget {budget}")
    idx, eids, rows, cols = _nomadic_structure(G)
    vals = A.signs[eids[cols, 0]].astype(np.int64) * A.signs[eids[cols, 1]].astype(np.int64)
    B = sparse.csr_matrix((vals, (rows, cols)), shape=(len(idx), len(idx)), dtype=np.int64)
    return NomadicWalkMatrix(index=idx, B=B, edge_pairs=eids)


def default_z_grid(s, t, count=16, seed=0):
    """``count`` points uniform in ``(-h, h)`` with ``h = 1/(2 sqrt((s-1)(t-1)))``, avoiding 0 and the poles."""
    h = 1 / (2 * math.sqrt((s - 1) * (t - 1)))
    rng = np.random.default_rng(seed)
    z = rng.uniform(-h, h, size=4 * count)
    bad = (np.abs(z) < 1e-12) | np.isclose(z, 1.0) | np.isclose(z, -1 / max(t - 1, 1))
    return z[~bad][:count]


def ihara_bass_sides(A, z, nomadic=None, M=None):
    """``(log|lhs|, sign lhs, log|rhs|, sign rhs)`` of the identity at one ``z``."""
    n, m, s, t = A.n, A.m, A.s, A.t
    Bd = (nomadic or nomadic_matrix(A)).B.toarray().astype(np.float64)
    Md = (M if M is not None else shifted_gram(A)).toarray().astype(np.float64)
    sl, ll = np.linalg.slogdet(np.eye(Bd.shape[0]) - z * Bd)
    L = np.eye(m) * (1 + z * (t - 2) + z * z * (s - 1) * (t - 1)) - z * Md
    sL, lL = np.linalg.slogdet(L)
    a, b = n * (t - 1) - m, n - m
    f1, f2 = 1 - z, 1 + (t - 1) * z
    sr = sL * (np.sign(f1) ** a) * (np.sign(f2) ** b)
    lr = lL + a * math.log(abs(f1)) + b * math.log(abs(f2))
    return ll, sl, lr, sr


def _rel_gap(ll, sl, lr, sr):
    if sl == 0 and sr == 0:
        return 0.0
    if sl == 0 or sr == 0:
        return 1.0
    if sl != sr:
        return 2.0
    return abs(math.expm1(lr - ll)) / max(1.0, math.exp(lr - ll))


def ihara_bass_check(A, z_samples=None, budget=2000):
    """Maximum relative discrepancy of the two sides over ``z_samples``."""
    nm = nomadic_matrix(A, budget=budget)
    M = shifted_gram(A)
    if z_samples is None:
        z_samples = default_z_grid(A.s, A.t)
    worst = 0.0
    for z in np.atleast_1d(z_samples):
        worst = max(worst, _rel_gap(*ihara_bass_sides(A, float(z), nm, M)))
    return worst


def ihara_bass_signing_sweep(G, s, t, z_samples, signings=None, chunk=2048, budget=2000):
    """Maximum relative discrepancy over many signings of one graph (all ``2^|E|`` by default).

    ``signings`` is an optional ``(count, |E|)`` array of +-1.
    """
    n, m = G.n_left, G.n_right
    E = G.n_edges
    idx, eids, rows, cols = _nomadic_structure(G)
    P = len(idx)
    if P > budget:
        raise BudgetExceeded(f"{P} nomadic pairs exceed the budget {budget}")
    if signings is None:
        if E > 20:
            raise BudgetExceeded(f"2^{E} signings is too many to sweep")
        signings = np.array(list(product((1, -1), repeat=E)), np.int64)
    signings = np.asarray(signings, np.int64)
    # M off-diagonal pattern: pairs of edges at the same left vertex
    mr, mc, me1, me2 = [], [], [], []
    for v in range(n):
        lo, hi = int(G.left_ptr[v]), int(G.left_ptr[v + 1])
        for e1 in range(lo, hi):
            for e2 in range(lo, hi):
                if e1 != e2:
                    mr.append(int(G.right[e1]))
                    mc.append(int(G.right[e2]))
                    me1.append(e1)
                    me2.append(e2)
    a, b = n * (t - 1) - m, n - m
    z = np.asarray(z_samples, np.float64)
    worst = 0.0
    for start in range(0, len(signings), chunk):
        sg = signings[start:start + chunk]
        C = len(sg)
        B = np.zeros((C, P, P))
        B[:, rows, cols] = sg[:, eids[cols, 0]] * sg[:, eids[cols, 1]]
        M = np.zeros((C, m, m))
        np.add.at(M, (slice(None), np.array(mr), np.array(mc)), sg[:, me1] * sg[:, me2])
        for zz in z:
            sl, ll = np.linalg.slogdet(np.eye(P)[None] - zz * B)
            L = np.eye(m)[None] * (1 + zz * (t - 2) + zz * zz * (s - 1) * (t - 1)) - zz * M
            sL, lL = np.linalg.slogdet(L)
            f1, f2 = 1 - zz, 1 + (t - 1) * zz
            sr = sL * np.sign(f1) ** a * np.sign(f2) ** b
            lr = lL + a * math.log(abs(f1)) + b * math.log(abs(f2))
            ok = (sl == sr) & (sl != 0)
            gap = np.where(ok, np.abs(np.expm1(lr - ll)) / np.maximum(1.0, np.exp(lr - ll)), 2.0)
            gap = np.where((sl == 0) & (sr == 0), 0.0, gap)
            worst = max(worst, float(gap.max()))
    return worst


def spectral_radius(mat):
    d = mat.toarray() if sparse.issparse(mat) else np.asarray(mat)
    if d.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(d.astype(np.float64)))))


def spectral_radius_reduction(rho_B, s, t, eps):
    """Interval ``t-2 +- (2+4 eps^2) sqrt((s-1)(t-1))`` for ``Spec(M)`` given ``rho(B) <= (1+eps) sqrt((s-1)(t-1))``."""
    base = math.sqrt((s - 1) * (t - 1))
    if eps > 0.5:
        raise HypothesisViolated(f"eps must be at most 1/2, got {eps}")
    if rho_B > (1 + eps) * base * (1 + 1e-12):
        raise HypothesisViolated(f"rho(B) = {rho_B} exceeds (1+eps) sqrt((s-1)(t-1)) = {(1 + eps) * base}")
    r = (2 + 4 * eps * eps) * base
    return t - 2 - r, t - 2 + r


def nomadic_eigs_from_gram(lam, s, t):
    """Values ``1/z`` for the roots of ``1 + z(t-2-lam) + z^2 (s-1)(t-1) = 0``; they are eigenvalues of ``B``."""
    roots = np.roots([(s - 1) * (t - 1), t - 2 - lam, 1.0])
    return 1.0 / roots


# ---------------------------------------------------------------------------
# hikes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HikeRecord:
    """A closed walk of ``4*ell`` steps from right vertex ``start``; ``edges[i]`` is the edge id of step i+1."""

    start: int
    edges: tuple
    even: bool
    singleton_free: bool
    special: bool

    def vertices(self, G):
        seq = [("R", self.start)]
        for e in self.edges:
            side, cur = seq[-1]
            if side == "R":
                seq.append(("L", int(G.left[e])))
            else:
                seq.append(("R", int(G.right[e])))
        return seq

    def multiplicity(self):
        out = {}
        for e in self.edges:
            out[e] = out.get(e, 0) + 1
        return out


@dataclass
class HikeCounts:
    total: int = 0
    even: int = 0
    singleton_free: int = 0
    special: int = 0
    even_special: int = 0
    records: list = None


def _classify(edges, ell):
    mult = {}
    for e in edges:
        mult[e] = mult.get(e, 0) + 1
    even = all(c % 2 == 0 for c in mult.values())
    sfree = all(c != 1 for c in mult.values())
    L4 = 4 * ell
    e = edges
    special = (e[0] == e[L4 - 1] and e[1] == e[L4 - 2]
               and e[2 * ell - 1] == e[2 * ell] and e[2 * ell - 2] == e[2 * ell + 1])
    return even, sfree, special


def enumerate_hikes(G, ell, keep_records=False, budget=10**7):
    """Exact count of ``2*ell``-hikes (closed walks of ``4*ell`` steps from a right vertex).

    Walks are non-backtracking except between steps ``2*ell`` and
    ``2*ell + 1``.  Returns a :class:`HikeCounts`; ``records`` holds every
    hike when ``keep_records`` is set.
    """
    if ell < 1 or 4 * ell > 12:
        raise BudgetExceeded(f"hike length 4*ell = {4 * ell} outside 4..12")
    if G.n_edges > 16:
        raise BudgetExceeded(f"{G.n_edges} edges; hike enumeration is limited to 16")
    L4 = 4 * ell
    left_inc = [list(range(int(G.left_ptr[v]), int(G.left_ptr[v + 1]))) for v in range(G.n_left)]
    right_inc = [[] for _ in range(G.n_right)]
    for e in range(G.n_edges):
        right_inc[int(G.right[e])].append(e)
    counts = HikeCounts(records=[] if keep_records else None)
    visited = [0]

    def dfs(start, side, cur, path):
        visited[0] += 1
        if visited[0] > budget:
            raise BudgetExceeded(f"hike enumeration visited more than {budget} partial walks")
        step = len(path)
        if step == L4:
            if side == "R" and cur == start:
                even, sfree, special = _classify(path, ell)
                counts.total += 1
                counts.even += even
                counts.singleton_free += sfree
                counts.special += special
                counts.even_special += even and special
                if keep_records:
                    counts.records.append(HikeRecord(start, tuple(path), even, sfree, special))
            return
        inc = right_inc[cur] if side == "R" else left_inc[cur]
        for e in inc:
            if path and e == path[-1] and step != 2 * ell:
                continue
            nxt = int(G.left[e]) if side == "R" else int(G.right[e])
            path.append(e)
            dfs(start, "L" if side == "R" else "R", nxt, path)
            path.pop()

    for r in range(G.n_right):
        dfs(r, "R", r, [])
    return counts


def hike_sign_sum(G, ell, signs, records):
    """``sum over special hikes of the product of edge signs`` (integer)."""
    sg = np.asarray(signs, np.int64)
    total = 0
    for h in records:
        if h.special:
            total += int(np.prod(sg[list(h.edges)]))
    return total


def nomadic_trace(B, ell):
    """``tr(B^ell (B^T)^ell) = ||B^ell||_F^2`` in exact integer arithmetic."""
    D = B.toarray().astype(object) if sparse.issparse(B) else np.asarray(B, dtype=object)
    P = np.identity(D.shape[0], dtype=object)
    for _ in range(ell):
        P = P.dot(D)
    return int(np.sum(P * P))


def hike_trace_identity(A_graph, ell, budget=10**7):
    """Compare the signing sum of ``tr(B^ell (B^T)^ell)`` with ``2^|E|`` times the even special hike count.

    Returns ``(trace_sum, even_special_count, n_signings)``; the identity
    says ``trace_sum == even_special_count * n_signings``.
    """
    from .ensemble import SignedBipartiteMatrix

    G = A_graph
    E = G.n_edges
    if E > 16:
        raise BudgetExceeded(f"{E} edges; the signing sweep is limited to 16")
    counts = enumerate_hikes(G, ell + 1, budget=budget)
    total = 0
    for sg in product((1, -1), repeat=E):
        A = SignedBipartiteMatrix(G, np.array(sg, np.int8))
        total += nomadic_trace(nomadic_matrix(A).B, ell)
    return total, counts.even_special, 2 ** E
