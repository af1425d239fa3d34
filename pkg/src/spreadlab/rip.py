"""lp restricted-isometry bounds from unique expansion, and an empirical RIP probe.

Certification only ever flows from a verified expansion certificate.  The
probe measures ``||Ax||_p / ||x||_p`` on sparse supports and is a sanity
check, never a proof.
"""
import math
from dataclasses import dataclass, field
from itertools import combinations, islice
from math import comb

import numpy as np

from . import kernels
from .ensemble import BipartiteGraph, SignedBipartiteMatrix
from .errors import (BudgetExceeded, HypothesisViolated, InvalidDelta, InvalidParams,
                     PreconditionFailed)
from .fileio import read_graph
from .graphs import bound_right_degrees, unique_neighbors, verify_unique_expansion
from .spread import rip_to_spread_params


def rip_bounds_from_expansion(t, s_max, mu, p, delta1, delta2):
    """Coefficients ``(lo, hi)`` with ``lo ||x||_p^p <= ||Ax||_p^p <= hi ||x||_p^p`` on expanding supports.

    ``lo = t(1-mu)/(1+d1)^(p-1) - mu t (s_max-1)^(p-1) / d1^(p-1)`` and
    ``hi = t/(1-d2)^(p-1) + mu t (s_max-1)^(p-1) / d2^(p-1)``.  At ``p = 1``
    they collapse to ``(t(1-2mu), t(1+mu))``.  ``lo`` may be nonpositive.
    """
    if not p >= 1:
        raise InvalidParams(f"p must be >= 1, got {p}")
    if not 0 <= mu < 1:
        raise InvalidParams(f"mu must lie in [0, 1), got {mu}")
    if not delta1 > 0:
        raise InvalidDelta(f"delta1 must be positive, got {delta1}")
    if not 0 < delta2 < 1:
        raise InvalidDelta(f"delta2 must lie in (0, 1), got {delta2}")
    if p == 1:
        return t * (1 - 2 * mu), t * (1 + mu)
    q = p - 1
    tail = (s_max - 1) ** q
    lo = t * (1 - mu) / (1 + delta1) ** q - mu * t / delta1 ** q * tail
    hi = t / (1 - delta2) ** q + mu * t / delta2 ** q * tail
    return lo, hi


def best_delta1(t, s_max, mu, p, tol=1e-10):
    """``delta1 > 0`` maximizing the lower coefficient, by golden-section search on ``log delta1``."""
    if p == 1:
        return 1.0
    f = lambda z: rip_bounds_from_expansion(t, s_max, mu, p, math.exp(z), 0.5)[0]
    a, b = math.log(1e-8), math.log(1e8)
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    while b - a > tol:
        if f(c) > f(d):
            b, d = d, c
            c = b - g * (b - a)
        else:
            a, c = c, d
            d = a + g * (b - a)
    return math.exp((a + b) / 2)


def rip_precondition(mu, s_max, p):
    """Right-hand side ``9 mu s_max^(p-1)`` that ``eps^2`` must reach."""
    return 9 * mu * s_max ** (p - 1)


def smallest_admissible_eps(mu, s_max, p):
    """Smallest float ``eps`` with ``eps^2 >= 9 mu s_max^(p-1)``."""
    need = rip_precondition(mu, s_max, p)
    eps = math.sqrt(need)
    while eps * eps < need:
        eps = math.nextafter(eps, math.inf)
    return eps


@dataclass
class RipCertificate:
    """``K(1-eps)||x||_p <= ||Ax||_p <= K(1+eps)||x||_p`` for every ``k``-sparse ``x``."""

    p: float
    k: int
    epsilon: float
    K: float
    delta1: float
    delta2: float
    s_max: int
    mu: float
    lower_coeff: float
    upper_coeff: float
    source: object = None

    @property
    def lower(self):
        return self.K * (1 - self.epsilon)

    @property
    def upper(self):
        return self.K * (1 + self.epsilon)

    def to_dict(self):
        return {"p": self.p, "k": self.k, "epsilon": self.epsilon, "K": self.K,
                "delta1": self.delta1, "delta2": self.delta2, "s_max": self.s_max, "mu": float(self.mu),
                "lower_coeff": self.lower_coeff, "upper_coeff": self.upper_coeff,
                "lower": self.lower, "upper": self.upper}


def certify_rip(cert, t, s_max, p, eps):
    """RIP certificate at sparsity ``cert.max_set_size_checked`` from a unique-expansion certificate.

    Uses ``delta1 = delta2 = eps/3`` and ``K = t^(1/p)``; requires
    ``eps^2 >= 9 mu s_max^(p-1)``.
    """
    if not 1 <= p < 2:
        raise InvalidParams(f"p must lie in [1, 2), got {p}")
    if not 0 < eps <= 1:
        raise InvalidParams(f"eps must lie in (0, 1], got {eps}")
    if not cert.valid:
        raise PreconditionFailed(f"expansion certificate has a counterexample {cert.counterexample}")
    if cert.mode != "exhaustive" and not cert.external:
        raise PreconditionFailed("sampled expansion certificates cannot back a RIP certificate")
    mu = cert.mu
    need = rip_precondition(mu, s_max, p)
    if eps * eps < need:
        raise PreconditionFailed(
            f"eps^2 = {eps * eps!r} < 9*mu*s_max^(p-1) = 9*{mu!r}*{s_max}^{p - 1!r} = {need!r}")
    d = eps / 3
    lo, hi = rip_bounds_from_expansion(t, s_max, mu, p, d, d)
    # the coefficient bounds imply the norm bounds through (1 +- eps)^(1/p)
    slack = 1e-12 * t
    if lo < (1 - eps) * t - slack or hi > (1 + eps) * t + slack:
        raise ArithmeticError(f"coefficients ({lo}, {hi}) do not fit t(1 +- eps) for eps={eps}")
    if (1 + eps) ** (1 / p) > 1 + eps + 1e-15 or (1 - eps) ** (1 / p) < 1 - eps - 1e-15:
        raise ArithmeticError("(1 +- eps)^(1/p) is not bracketed by 1 +- eps")
    return RipCertificate(p=p, k=cert.max_set_size_checked, epsilon=eps, K=t ** (1 / p),
                          delta1=d, delta2=d, s_max=int(s_max), mu=mu,
                          lower_coeff=lo, upper_coeff=hi, source=cert)


# ---------------------------------------------------------------------------
# empirical probe
# ---------------------------------------------------------------------------


@dataclass
class RipProbe:
    p: float
    k: int
    min_ratio: float
    max_ratio: float
    mode: str
    supports_checked: int = 0
    argmin_support: tuple = ()
    argmax_support: tuple = ()
    argmin_x: np.ndarray = None
    argmax_x: np.ndarray = None

    def to_dict(self):
        return {"p": self.p, "k": self.k, "min_ratio": self.min_ratio, "max_ratio": self.max_ratio,
                "mode": self.mode, "supports_checked": self.supports_checked,
                "argmin_support": list(self.argmin_support), "argmax_support": list(self.argmax_support)}


def _support_iter(n, k, mode, budget, rng):
    if mode == "exhaustive":
        total = comb(n, k)
        if total > budget:
            raise BudgetExceeded(f"C({n},{k}) = {total} supports exceed the budget {budget}")
        return combinations(range(n), k), total
    if mode == "sampled":
        sets = (tuple(sorted(rng.choice(n, size=k, replace=False).tolist())) for _ in range(budget))
        return sets, budget
    raise InvalidParams(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")


def probe_rip(A, p, k, mode="exhaustive", budget=10**6, restarts=64, seed=0, iters=300):
    """Extremes of ``||Ax||_p / ||x||_p`` over x supported on size-``k`` sets.

    Every smaller support lies inside some size-``k`` one, so those are
    covered too.  ``p = 2`` is exact through singular values of the column
    submatrix; other ``p`` use descent from the coordinate vectors plus
    ``restarts`` random starts per support.
    """
    n = A.n
    if not 1 <= k <= n:
        raise InvalidParams(f"k must lie in [1, {n}], got {k}")
    if not p >= 1:
        raise InvalidParams(f"p must be >= 1, got {p}")
    rng = np.random.default_rng(seed)
    supports, total = _support_iter(n, k, mode, budget, rng)
    D = A.to_dense() if n <= 4096 else None
    best = [np.inf, -np.inf, (), (), None, None]
    if p == 2:
        for block in iter(lambda: list(islice(supports, 4096)), []):
            S = np.array(block, dtype=np.int64)
            sub = np.transpose(D[:, S], (1, 0, 2))
            sv = np.linalg.svd(sub, compute_uv=False)
            lo, hi = sv[:, -1], sv[:, 0]
            i, j = int(np.argmin(lo)), int(np.argmax(hi))
            if lo[i] < best[0]:
                best[0], best[2] = float(lo[i]), tuple(block[i])
            if hi[j] > best[1]:
                best[1], best[3] = float(hi[j]), tuple(block[j])
    else:
        eye = np.eye(k)
        for S in supports:
            cols = D[:, list(S)]
            sub = cols[np.any(cols != 0, axis=1)]
            starts = np.vstack([eye, rng.standard_normal((restarts, k))])
            lo, hi, xl, xh = kernels.lp_extremes(sub, p, starts, iters)
            lo, hi = lo ** (1 / p), hi ** (1 / p)
            if lo < best[0]:
                best[0], best[2], best[4] = lo, tuple(S), xl
            if hi > best[1]:
                best[1], best[3], best[5] = hi, tuple(S), xh
    return RipProbe(p=p, k=k, min_ratio=best[0], max_ratio=best[1], mode=mode,
                    supports_checked=total, argmin_support=best[2], argmax_support=best[3],
                    argmin_x=best[4], argmax_x=best[5])


# ---------------------------------------------------------------------------
# explicit pipeline from an externally supplied expander
# ---------------------------------------------------------------------------


@dataclass
class PipelineResult:
    matrix: SignedBipartiteMatrix
    certificate: RipCertificate
    expansion: object
    spread_k: int
    spread_eps: float
    nominal_spread_eps: float
    alpha_ok: bool
    graph: BipartiteGraph = field(repr=False, default=None)


def explicit_pipeline(expander, alpha, p, eps, gamma, mu, budget=10**7):
    """Degree-bound an expander, verify its claimed ``(gamma, mu)``, and certify its 0/1 matrix.

    ``expander`` is a BipartiteGraph or a path to a ``BIGRAPH`` file.  The
    kernel spread parameters are ``(gamma n, eps')`` with ``eps'`` from the
    RIP-to-spread conversion; ``nominal_spread_eps`` is ``gamma^(1-1/p)``.
    """
    G = expander if isinstance(expander, BipartiteGraph) else read_graph(expander)
    if G.n_left == 0:
        raise InvalidParams("empty expander graph")
    t = int(G.left_degrees[0])
    if np.any(G.left_degrees != t):
        raise PreconditionFailed("expander is not left-regular")
    if G.n_right > G.n_left:
        raise PreconditionFailed(f"expander has more right ({G.n_right}) than left ({G.n_left}) vertices")
    G2 = bound_right_degrees(G, t)
    exp_cert = verify_unique_expansion(G2, t, gamma, mu, mode="exhaustive", budget=budget)
    if not exp_cert.valid:
        raise PreconditionFailed(f"claimed ({gamma}, {mu}) expansion fails on {exp_cert.counterexample}")
    s_max = int(G2.right_degrees.max())
    rc = certify_rip(exp_cert, t, s_max, p, eps)
    B = SignedBipartiteMatrix(G2, np.ones(G2.n_edges, np.int8))
    k = rc.k
    spread = rip_to_spread_params(k, eps, p, G.n_left) if eps < 1 else 0.0
    return PipelineResult(matrix=B, certificate=rc, expansion=exp_cert, spread_k=k,
                          spread_eps=spread, nominal_spread_eps=gamma ** (1 - 1 / p),
                          alpha_ok=G2.n_right <= alpha * G.n_left, graph=G2)


# ---------------------------------------------------------------------------
# weak l2 bound and disjoint unique-neighbor sets
# ---------------------------------------------------------------------------


def weak_l2_bound(t, gamma, mu, n, A_opnorm, c1=1 / (2 * math.sqrt(2)), c2=2.0, c=1.0):
    """``c1 sqrt(t) (sqrt(t)/||A||_2)^(c2 log(gamma n) / log(1/mu))``.

    Hypotheses: ``0 < mu <= 2/9``, ``0 < gamma <= 2 mu`` and
    ``gamma n >= (1/mu)^c``.  The constants are free parameters.
    """
    if not 0 < mu <= 2 / 9:
        raise HypothesisViolated(f"need 0 < mu <= 2/9, got {mu}")
    if not 0 < gamma <= 2 * mu:
        raise HypothesisViolated(f"need 0 < gamma <= 2 mu, got gamma={gamma}, mu={mu}")
    if gamma * n < (1 / mu) ** c:
        raise HypothesisViolated(f"need gamma n >= (1/mu)^c, got {gamma * n} < {(1 / mu) ** c}")
    expo = c2 * math.log(gamma * n) / math.log(1 / mu)
    return c1 * math.sqrt(t) * (math.sqrt(t) / A_opnorm) ** expo


def disjoint_unique_neighbor_sets(G, sets):
    """``T_i = U(S) ∩ N(S_i)`` for disjoint ``S_1..S_b`` with union ``S``.

    Each ``r`` in ``T_i`` has exactly one neighbor in ``S_i`` and none in the
    other sets.
    """
    sets = [sorted(int(v) for v in S) for S in sets]
    flat = [v for S in sets for v in S]
    if len(set(flat)) != len(flat):
        raise InvalidParams("sets must be pairwise disjoint")
    U = set(unique_neighbors(G, flat).tolist())
    out = []
    for S in sets:
        nb = set()
        for v in S:
            nb.update(G.left_neighbors(v).tolist())
        out.append(sorted(U & nb))
    return out
