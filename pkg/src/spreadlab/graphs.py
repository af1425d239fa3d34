"""Graph checks and constructions: tree balls, bicycle-freeness, unique
expansion certificates, the peeling matching and right-degree splitting."""
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import kernels
from .ensemble import BipartiteGraph, SignedBipartiteMatrix
from .errors import (BudgetExceeded, InvalidBall, InvalidParams, NotFound, PeelStuck,
                     PreconditionFailed)

# ---------------------------------------------------------------------------
# tree balls
# ---------------------------------------------------------------------------


@dataclass
class TreeBall:
    """BFS layers of an acyclic biregular ball of radius ``2*ell + 1``.

    ``layers[d]`` holds the vertex ids at depth ``d`` (left ids at even depths,
    right ids at odd depths).  ``parents[d][i]`` is the position inside
    ``layers[d-1]`` of the parent of ``layers[d][i]``; ``parents[0]`` is empty.
    """

    root: int
    ell: int
    t: int
    s: int
    layers: list
    parents: list

    @property
    def radius(self):
        return 2 * self.ell + 1

    @property
    def left_vertices(self):
        return np.concatenate(self.layers[0::2])

    @property
    def internal_right(self):
        return np.concatenate(self.layers[1:-1:2]) if self.ell > 0 else np.zeros(0, np.int64)

    @property
    def leaf_right(self):
        return self.layers[-1]

    def layer_sizes(self):
        return [int(a.size) for a in self.layers]


def validate_ball(G, ball):
    """Check ``ball`` against ``G``; return the parent edge id of every vertex per depth.

    The checks are enough to pin the induced subgraph to the tree: vertices
    are distinct, every ball left vertex has degree ``t`` and every internal
    right vertex degree ``s``, each has the expected number of children and
    every parent-child pair is an edge.  A vertex's edges are then exactly its
    parent edge plus its child edges.
    """
    t, s, ell = ball.t, ball.s, ball.ell
    L = ball.layers
    if len(L) != 2 * ell + 2 or len(ball.parents) != len(L):
        raise InvalidBall(f"expected {2 * ell + 2} layers, got {len(L)}")
    if L[0].size != 1 or int(L[0][0]) != ball.root:
        raise InvalidBall("layer 0 must hold only the root")
    # marking layer by layer keeps the duplicate check at one byte per vertex
    for side, size in ((0, G.n_left), (1, G.n_right)):
        seen = np.zeros(size, bool)
        total = 0
        for layer in L[side::2]:
            if layer.size and (layer.min() < 0 or layer.max() >= size):
                raise InvalidBall("ball vertex out of range")
            seen[layer] = True
            total += layer.size
        if int(np.count_nonzero(seen)) != total:
            raise InvalidBall("a vertex appears twice in the ball")
        del seen
    for d in range(2 * ell + 1):
        layer = L[d]
        if d % 2 == 0:
            if np.any(G.left_degrees[layer] != t):
                raise InvalidBall(f"left vertex at depth {d} does not have degree {t}")
            want = t if d == 0 else t - 1
        else:
            if np.any(G.right_degrees[layer] != s):
                raise InvalidBall(f"right vertex at depth {d} does not have degree {s}")
            want = s - 1
        par = ball.parents[d + 1]
        if par.size != L[d + 1].size or (par.size and (par.min() < 0 or par.max() >= layer.size)):
            raise InvalidBall(f"bad parent index at depth {d + 1}")
        if np.any(np.bincount(par, minlength=layer.size) != want):
            raise InvalidBall(f"vertex at depth {d} does not have {want} children")
    edges = [np.zeros(0, np.int64)]
    for d in range(1, 2 * ell + 2):
        par_ids = L[d - 1][ball.parents[d]]
        if d % 2 == 1:
            e = G.edge_index(par_ids, L[d])
        else:
            e = G.edge_index(L[d], par_ids)
        del par_ids
        if np.any(e < 0):
            raise InvalidBall(f"parent-child pair at depth {d} is not an edge")
        edges.append(e)
    return edges


def ball_at(G, root, ell, t, s):
    """BFS the radius ``2*ell + 1`` ball around left vertex ``root``; InvalidBall unless it is a biregular tree."""
    lptr, rptr = G.left_ptr, G.right_ptr
    lnb, rnb = G.right, G.right_nbrs
    nodes = np.array([root], np.int64)
    parent_ids = np.array([-1], np.int64)
    layers, parents = [nodes], [np.zeros(0, np.int64)]
    seen_l = {int(root)}
    seen_r = set()
    for d in range(2 * ell + 1):
        left_side = d % 2 == 0
        deg = G.left_degrees if left_side else G.right_degrees
        need = t if left_side else s
        if np.any(deg[nodes] != need):
            raise InvalidBall(f"vertex at depth {d} has degree other than {need}")
        kids, owner = kernels.csr_gather(lptr if left_side else rptr, lnb if left_side else rnb, nodes)
        keep = kids != parent_ids[owner]
        kids, owner = kids[keep], owner[keep]
        seen = seen_r if left_side else seen_l
        kl = kids.tolist()
        if len(set(kl)) != len(kl) or not seen.isdisjoint(kl):
            raise InvalidBall(f"cycle closes at depth {d + 1} around root {root}")
        seen.update(kl)
        parent_ids = nodes[owner]
        layers.append(kids)
        parents.append(owner.astype(np.int64))
        nodes = kids
    return TreeBall(int(root), int(ell), int(t), int(s), layers, parents)


def acyclic_depths(G, t, s, max_radius):
    """Largest ``ell <= max_radius`` per left vertex with an acyclic biregular ball (``-1`` if none)."""
    d = kernels.tree_depths(G.left_ptr, G.right, G.right_ptr, G.right_nbrs, t, s, 2 * max_radius + 1)
    return np.where(d >= 1, (d - 1) // 2, -1)


def find_acyclic_ball(G, t, s, max_radius):
    """Left vertex with the largest acyclic ball (ties to the smallest index).

    Raises NotFound when no left vertex has an acyclic radius-3 ball.
    """
    ells = acyclic_depths(G, t, s, max_radius)
    v = int(np.argmax(ells))
    if ells[v] < 1:
        raise NotFound(f"no left vertex has an acyclic radius-3 ball (max_radius={max_radius})")
    return ball_at(G, v, int(ells[v]), t, s)


def biregular_tree(t, s, ell, seed=None):
    """The (t, s)-biregular tree of depth ``2*ell + 1`` as a signed matrix and its ball.

    Vertices are numbered in BFS order.  ``seed=None`` gives all signs +1.
    """
    L = [1] + [t * (t - 1) ** (k - 1) * (s - 1) ** k for k in range(1, ell + 1)]
    c = [t] + [t - 1] * ell
    R = [L[k] * c[k] for k in range(ell + 1)]
    loff = np.concatenate([[0], np.cumsum(L)]).astype(np.int64)
    roff = np.concatenate([[0], np.cumsum(R)]).astype(np.int64)
    n, m = int(loff[-1]), int(roff[-1])
    # right endpoints are written in place, one (L[k], t) block per left layer, to keep peak memory near |E|
    right = np.empty(n * t, np.int64)
    # ball ids take half the space when they fit in 32 bits
    idx = np.int32 if max(n, m) < 2**31 else np.int64
    layers, parents = [], []
    for k in range(ell + 1):
        i = np.arange(L[k], dtype=np.int64)
        block = right[loff[k] * t:loff[k + 1] * t].reshape(L[k], t)
        kids = block[:, t - c[k]:]
        kids[:] = i[:, None] * c[k]
        kids += roff[k] + np.arange(c[k], dtype=np.int64)
        if k:
            block[:, 0] = roff[k - 1] + i // (s - 1)
            parents.append((i // (s - 1)).astype(idx))
        else:
            parents.append(np.zeros(0, idx))
        layers.append((loff[k] + i).astype(idx))
        layers.append(np.arange(roff[k], roff[k + 1], dtype=idx))
        parents.append(np.arange(R[k], dtype=idx) // idx(c[k]))
        del i, block, kids
    left = np.repeat(np.arange(n, dtype=np.int64), t)
    G = BipartiteGraph(n, m, left, right, presorted=True, check=False)
    if seed is None:
        signs = np.ones(G.n_edges, np.int8)
    else:
        signs = (2 * np.random.default_rng(seed).integers(0, 2, G.n_edges) - 1).astype(np.int8)
    return SignedBipartiteMatrix(G, signs), TreeBall(0, ell, t, s, layers, parents)


# ---------------------------------------------------------------------------
# bicycle-freeness
# ---------------------------------------------------------------------------


def _adjacency(G):
    if isinstance(G, BipartiteGraph):
        n = G.n_left
        adj = [[] for _ in range(n + G.n_right)]
        for u, r in zip(G.left.tolist(), G.right.tolist()):
            adj[u].append(n + r)
            adj[n + r].append(u)
        return adj
    if isinstance(G, dict):
        size = max([max([k] + list(v)) for k, v in G.items()], default=-1) + 1
        adj = [[] for _ in range(size)]
        for k, vs in G.items():
            for v in vs:
                if v not in adj[k]:
                    adj[k].append(v)
                if k not in adj[v]:
                    adj[v].append(k)
        return adj
    return [list(a) for a in G]


def is_bicycle_free(G, radius):
    """True iff every radius-``radius`` ball has cyclomatic number at most 1.

    ``G`` is a BipartiteGraph (vertex ``v < n_left`` is left vertex ``v``,
    ``n_left + r`` is right vertex ``r``), an adjacency list or a dict of
    neighbor lists.  Returns ``(ok, witness)`` with the first offending vertex.
    """
    adj = _adjacency(G)
    for v in range(len(adj)):
        dist = {v: 0}
        frontier = [v]
        for d in range(radius):
            nxt = []
            for x in frontier:
                for w in adj[x]:
                    if w not in dist:
                        dist[w] = d + 1
                        nxt.append(w)
            frontier = nxt
        n_edges = sum(1 for x in dist for w in adj[x] if w in dist) // 2
        if n_edges - len(dist) + 1 > 1:
            return False, v
    return True, None


# ---------------------------------------------------------------------------
# expansion certificates
# ---------------------------------------------------------------------------


@dataclass
class ExpansionCertificate:
    """Outcome of checking ``|X(S)| >= t(1-mu)|S|`` for all left sets up to a size.

    ``kind`` is ``"unique"`` (X = unique neighbors) or ``"vertex"`` (X = all
    neighbors).  ``worst_mu`` is the smallest mu that would pass on the sets
    examined.
    """

    gamma: float
    mu: float
    max_set_size_checked: int
    mode: str
    counterexample: list = None
    n: int = 0
    t: int = 0
    kind: str = "unique"
    worst_mu: float = 0.0
    sets_checked: int = 0
    external: bool = field(default=False)

    @property
    def valid(self):
        return self.counterexample is None

    def to_json(self):
        d = {"gamma": self.gamma, "mu": float(self.mu), "max_set_size_checked": self.max_set_size_checked,
             "mode": self.mode}
        if self.counterexample is not None:
            d["counterexample"] = [int(v) for v in self.counterexample]
        d.update(n=self.n, t=self.t, kind=self.kind, worst_mu=self.worst_mu,
                 sets_checked=self.sets_checked)
        return json.dumps(d)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(**d)


def _violates(count, t, mu, k):
    return Fraction(int(count)) < t * (1 - Fraction(mu)) * k


def _expansion(G, t, gamma, mu, mode, budget, seed, kind):
    if np.any(G.left_degrees != t):
        raise InvalidParams(f"graph is not {t}-left-regular")
    n = G.n_left
    kmax = min(int(math.floor(gamma * n + 1e-12)), n)
    if kmax < 1:
        raise InvalidParams(f"gamma*n = {gamma * n} admits no nonempty set")
    nbrs = G.neighbor_table()
    pick = 0 if kind == "unique" else 2
    if mode == "exhaustive":
        total = sum(comb(n, k) for k in range(1, kmax + 1))
        if total > budget:
            raise BudgetExceeded(f"exhaustive check needs {total} sets, budget is {budget}")
        res = kernels.subset_scan(nbrs, G.n_right, kmax)
        mins, args = res[pick], res[pick + 1]
        found = [(k, int(mins[k]), [int(v) for v in args[k, :k]]) for k in range(1, kmax + 1)]
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        total = 0
        found = []
        for k in range(1, kmax + 1):
            sets = _random_sets(rng, n, k, budget)
            u, nn = kernels.subset_counts(nbrs, sets)
            vals = u if kind == "unique" else nn
            i = int(np.argmin(vals))
            found.append((k, int(vals[i]), sorted(int(v) for v in sets[i])))
            total += len(sets)
    else:
        raise InvalidParams(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")
    worst = max(1 - c / (t * k) for k, c, _ in found)
    cex = next((S for k, c, S in found if _violates(c, t, mu, k)), None)
    # mu is kept as given so exact rationals survive into peel_matching
    return ExpansionCertificate(gamma=float(gamma), mu=mu, max_set_size_checked=kmax,
                                mode=mode, counterexample=cex, n=n, t=t, kind=kind,
                                worst_mu=float(worst), sets_checked=int(total))


def _random_sets(rng, n, k, count):
    if k == n:
        return np.arange(n, dtype=np.int64)[None, :]
    out = np.empty((0, k), np.int64)
    while len(out) < count:
        cand = np.sort(rng.integers(0, n, size=(2 * (count - len(out)), k)), axis=1)
        ok = np.all(cand[:, 1:] != cand[:, :-1], axis=1)
        out = np.concatenate([out, cand[ok]])
    return out[:count]


def verify_unique_expansion(G, t, gamma, mu, mode="exhaustive", budget=10**7, seed=0):
    """Check every left set of size <= gamma*n (or ``budget`` random ones per size) for unique expansion."""
    return _expansion(G, t, gamma, mu, mode, budget, seed, "unique")


def verify_vertex_expansion(G, t, gamma, mu, mode="exhaustive", budget=10**7, seed=0):
    """Same as :func:`verify_unique_expansion` but counting all neighbors of S."""
    return _expansion(G, t, gamma, mu, mode, budget, seed, "vertex")


def unique_neighbors(G, S):
    """Sorted right vertices with exactly one neighbor in the left set ``S``."""
    S = np.asarray(sorted(S), dtype=np.int64)
    if S.size == 0:
        return np.zeros(0, np.int64)
    nb, _ = kernels.csr_gather(G.left_ptr, G.right, S)
    vals, counts = np.unique(nb, return_counts=True)
    return vals[counts == 1]


def neighborhood(G, S):
    S = np.asarray(sorted(S), dtype=np.int64)
    if S.size == 0:
        return np.zeros(0, np.int64)
    nb, _ = kernels.csr_gather(G.left_ptr, G.right, S)
    return np.unique(nb)


def random_graph_expansion_params(t, alpha, c=1 / (2 * math.e ** 3)):
    """``(gamma, mu) = (c*alpha^2/t^4, 2/t)`` for random biregular graphs; ``c`` is a free constant."""
    return c * alpha ** 2 / t ** 4, 2 / t


# ---------------------------------------------------------------------------
# peeling matching
# ---------------------------------------------------------------------------


@dataclass
class PeelMatching:
    S: list
    edges: list
    owner: dict
    order: list

    def edges_at(self, v):
        return sum(1 for u, _ in self.edges if u == v)


def peel_matching(G, S, certificate):
    """Peel S one vertex at a time, matching each removed vertex to its current unique neighbors.

    At each step the smallest-index unprocessed ``v`` whose unique-neighbor
    set among unprocessed vertices has at least ``t(1-mu)`` elements is taken.
    """
    S = sorted(int(v) for v in set(S))
    t, mu = certificate.t, certificate.mu
    if certificate.n and len(S) > certificate.max_set_size_checked:
        raise PreconditionFailed(
            f"|S| = {len(S)} exceeds the certified size {certificate.max_set_size_checked}")
    need = t * (1 - Fraction(mu))
    remaining = list(S)
    cnt = {}
    for v in remaining:
        for r in G.left_neighbors(v).tolist():
            cnt[r] = cnt.get(r, 0) + 1
    edges, owner, order = [], {}, []
    while remaining:
        pick = None
        for v in remaining:
            uniq = [r for r in G.left_neighbors(v).tolist() if cnt[r] == 1]
            if len(uniq) >= need:
                pick = (v, uniq)
                break
        if pick is None:
            raise PeelStuck(f"no eligible vertex among {remaining}", subset=list(remaining))
        v, uniq = pick
        for r in uniq:
            edges.append((v, r))
            owner[r] = v
        for r in G.left_neighbors(v).tolist():
            cnt[r] -= 1
        remaining.remove(v)
        order.append(v)
    return PeelMatching(S=S, edges=edges, owner=owner, order=order)


# ---------------------------------------------------------------------------
# right-degree splitting
# ---------------------------------------------------------------------------


def bound_right_degrees(G, t=None):
    """Split heavy right vertices until every right degree is at most ``t * n_left / n_right``.

    A vertex above the bound hands its ``floor(t*n_left/n_right)`` edges with
    the smallest left indices to a fresh right vertex, repeatedly.  Returns
    ``G`` itself when nothing needs splitting.
    """
    if t is None:
        t = int(G.left_degrees[0]) if G.n_left else 0
    if np.any(G.left_degrees != t):
        raise InvalidParams(f"graph is not {t}-left-regular")
    nL, nR = G.n_left, G.n_right
    if nR > nL or nR == 0:
        raise InvalidParams(f"need 0 < n_right <= n_left, got n_right={nR}, n_left={nL}")
    cap = (t * nL) // nR
    deg = G.right_degrees
    if not np.any(deg * nR > t * nL):
        return G
    new_right = G.right.copy()
    next_id = nR
    for r in np.flatnonzero(deg * nR > t * nL).tolist():
        eids = G.right_edges[G.right_ptr[r]:G.right_ptr[r + 1]]
        d = eids.size
        while d * nR > t * nL:
            new_right[eids[:cap]] = next_id
            next_id += 1
            eids = eids[cap:]
            d = eids.size
    return BipartiteGraph(nL, next_id, G.left, new_right)
