"""Constructive l2-compressibility attack on a signed biregular matrix.

A tree vector supported on an acyclic ball has ``Ax`` vanishing on every
internal right vertex, so ``||Ax||`` is tiny compared with ``||x||``.
Projecting it onto ``ker(A)`` moves it very little, which yields a kernel
vector close to a sparse one.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .ensemble import SparseVector, apply, apply_transpose
from .errors import AttackFailed, InvalidBall, InvalidParams, NoConvergence, NotFound, RankDeficient
from .graphs import find_acyclic_ball, validate_ball
from .spread import best_k_sparse_error, compressible_to_distortion_bound, lp_norm

DENSE_PROJECTION_LIMIT = 512


@dataclass
class TreeVector:
    """Signed tree vector on ``ball``.

    ``scaled`` holds the exact integer values ``x * (s-1)^ell`` so that the
    cancellation on internal right vertices can be checked without rounding.
    """

    x: SparseVector
    scaled: SparseVector
    scale: int
    ball: object

    @property
    def support_bound(self):
        t, s, ell = self.ball.t, self.ball.s, self.ball.ell
        if ell == 0:
            return 1
        return 1 + 2 * t * (t - 1) ** (ell - 1) * (s - 1) ** ell

    def predicted_Ax_norm_p(self, p):
        """``||Ax||_p^p = t (t-1)^ell (s-1)^((1-p) ell)``."""
        t, s, ell = self.ball.t, self.ball.s, self.ball.ell
        return t * (t - 1) ** ell * float(s - 1) ** ((1 - p) * ell)

    def predicted_x_norm_p(self, p):
        """``||x||_p^p`` summed over levels: ``1 + sum_k t (t-1)^(k-1) (s-1)^((1-p) k)``."""
        t, s, ell = self.ball.t, self.ball.s, self.ball.ell
        return 1.0 + sum(t * (t - 1) ** (k - 1) * float(s - 1) ** ((1 - p) * k) for k in range(1, ell + 1))


def build_tree_vector(A, ball):
    """Tree vector with root value +1 and ``x_v = -x_u * sign(u,r) * sign(v,r) / (s-1)`` down each path."""
    edges = validate_ball(A.graph, ball)
    s, ell = ball.s, ball.ell
    scale = (s - 1) ** ell
    vals = {0: np.array([scale], np.int64)}
    signs = A.signs
    for k in range(1, ell + 1):
        d = 2 * k
        up = ball.parents[d]
        s_child = signs[edges[d]].astype(np.int64)
        s_parent = signs[edges[d - 1]][up].astype(np.int64)
        grand = vals[d - 2][ball.parents[d - 1][up]]
        vals[d] = -(grand * s_parent * s_child) // (s - 1)
        del up, s_child, s_parent, grand
    idx = np.concatenate([ball.layers[d] for d in range(0, 2 * ell + 1, 2)])
    v = np.concatenate([vals[d] for d in range(0, 2 * ell + 1, 2)])
    del vals
    order = np.argsort(idx, kind="stable")
    idx, v = idx[order], v[order]
    scaled = SparseVector(A.n, idx, v)
    x = SparseVector(A.n, idx, v / float(scale))
    return TreeVector(x=x, scaled=scaled, scale=scale, ball=ball)


def tree_image_check(A, tv):
    """Exact integer check of ``A x``: returns ``(max |(Ax)_r|`` on internal r, set of ``|(Ax)_r|`` on leaves)."""
    y = apply(A, tv.scaled)
    np.abs(y, out=y)
    ball = tv.ball
    worst = 0
    for layer in ball.layers[1:-1:2]:
        worst = max(worst, int(y[layer].max()))
    leaf = y[ball.leaf_right]
    del y
    lo, hi = int(leaf.min()), int(leaf.max())
    return worst, ({lo} if lo == hi else set(np.unique(leaf).tolist()))


def _dot(a, b):
    return float(np.sum(a * b))


def _cg_gram(A, b, tol, maxiter):
    """Solve ``(A A^T) w = b`` by conjugate gradients with pairwise-summed inner products."""
    w = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = _dot(r, r)
    bnorm = np.sqrt(rr)
    history = []
    for it in range(1, maxiter + 1):
        q = apply(A, apply_transpose(A, p))
        pq = _dot(p, q)
        if pq <= 1e-14 * _dot(p, p):
            raise RankDeficient(f"A A^T looks singular: p^T A A^T p = {pq:.3e} at iteration {it}")
        a = rr / pq
        w += a * p
        r -= a * q
        rr_new = _dot(r, r)
        history.append(np.sqrt(rr_new) / bnorm)
        if np.sqrt(rr_new) <= tol * bnorm:
            return w, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergence(f"CG did not reach relative residual {tol} in {maxiter} iterations",
                        iterations=maxiter, residual=history[-1] if history else None)


def project_to_kernel(A, x, tol=1e-10, maxiter=None, method="auto"):
    """Orthogonal projection of ``x`` onto ``ker(A)``; returns ``(y, ||x - y||_2)``.

    ``method="auto"`` uses a dense QR for ``n <= 512`` and CG on ``A A^T``
    otherwise.
    """
    x = x.to_dense(np.float64) if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise InvalidParams(f"x has shape {x.shape}, expected ({A.n},)")
    if method == "auto":
        method = "dense" if A.n <= DENSE_PROJECTION_LIMIT else "cg"
    if method == "dense":
        Q, R = linalg.qr(A.to_dense().T, mode="economic")
        d = np.abs(np.diag(R))
        if d.size and d.min() <= 1e-10 * d.max():
            raise RankDeficient(f"A has numerically dependent rows (min |R_ii| = {d.min():.3e})")
        delta = Q @ (Q.T @ x)
    elif method == "cg":
        b = apply(A, x)
        if not np.any(b):
            return x.copy(), 0.0
        w, _ = _cg_gram(A, b, tol, maxiter or 10 * A.m)
        delta = apply_transpose(A, w)
    else:
        raise InvalidParams(f"unknown method {method!r}")
    y = x - delta
    return y, float(np.sqrt(np.sum(delta * delta)))


@dataclass
class CompressibleWitness:
    """A kernel vector ``y`` within relative l2 distance ``epsilon`` of a ``k``-sparse vector."""

    y: np.ndarray
    k: int
    epsilon: float
    p: float
    residual: float
    distortion_lower_bound: float
    ell: int = 0
    root: int = 0
    support: np.ndarray = None
    values: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        d = dict(self.meta)
        d.update(ell=self.ell, root=self.root, k=self.k, epsilon=self.epsilon, p=self.p,
                 residual=self.residual, distortion_lower_bound=self.distortion_lower_bound,
                 support=[int(i) for i in self.support], values=[float(v) for v in self.values])
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    def recheck(self):
        """``best_k_sparse_error(y, k, p)``; it must not exceed ``epsilon``."""
        return best_k_sparse_error(self.y, self.k, self.p)[0]


def attack(A, max_radius=8, tol=1e-10, seed=None):
    """Find an acyclic ball, build its tree vector and project it onto ``ker(A)``.

    ``epsilon = gap / (||x||_2 - gap)`` where ``gap`` is the projection
    distance; ``y`` is then within ``epsilon * ||y||_2`` of the sparse ``x``.
    """
    t, s = A.t, A.s
    try:
        ball = find_acyclic_ball(A.graph, t, s, max_radius)
    except NotFound as exc:
        raise AttackFailed(str(exc)) from exc
    tv = build_tree_vector(A, ball)
    x = tv.x.to_dense(np.float64)
    y, gap = project_to_kernel(A, x, tol=tol)
    xnorm = float(np.sqrt(np.sum(x * x)))
    if gap >= xnorm:
        raise AttackFailed(f"projection moved x by {gap:.6g} >= ||x||_2 = {xnorm:.6g}")
    eps = gap / (xnorm - gap)
    Ay = apply(A, y)
    residual = float(np.sqrt(np.sum(Ay * Ay)) / np.sqrt(np.sum(y * y)))
    k = tv.x.nnz
    meta = {"n": A.n, "m": A.m, "s": s, "t": t, "seed": seed}
    return CompressibleWitness(
        y=y, k=k, epsilon=eps, p=2.0, residual=residual,
        distortion_lower_bound=compressible_to_distortion_bound(k, A.n, eps, 1, 2),
        ell=ball.ell, root=ball.root, support=tv.x.indices, values=tv.x.values, meta=meta,
    )


@dataclass
class LpRatioResult:
    x: SparseVector
    ratio: float
    formula_ratio: float
    bound: float
    converse_regime: bool


def lp_ratio_witness(A, ball, p, eps):
    """``||Ax||_p / ||x||_p`` for the tree vector on ``ball``, by direct product and by level masses.

    ``bound`` is ``t^(1/p) (alpha (s-1)^(2-p))^(ell/p)`` with ``alpha = t/s``;
    ``converse_regime`` flags ``(s-1)^(2-p) <= 1/((1+eps) alpha)``.
    """
    if not 1 <= p <= 2:
        raise InvalidParams(f"p must lie in [1, 2], got {p}")
    t, s, ell = ball.t, ball.s, ball.ell
    tv = build_tree_vector(A, ball)
    Ax = apply(A, tv.x)
    ratio = lp_norm(Ax, p) / lp_norm(tv.x.values, p)
    formula = (tv.predicted_Ax_norm_p(p) / tv.predicted_x_norm_p(p)) ** (1 / p)
    alpha = t / s
    bound = t ** (1 / p) * (alpha * (s - 1) ** (2 - p)) ** (ell / p)
    converse = (s - 1) ** (2 - p) <= 1 / ((1 + eps) * alpha)
    return LpRatioResult(x=tv.x, ratio=ratio, formula_ratio=formula, bound=bound, converse_regime=converse)


__all__ = ["TreeVector", "build_tree_vector", "tree_image_check", "project_to_kernel",
           "CompressibleWitness", "attack", "lp_ratio_witness", "LpRatioResult", "InvalidBall"]
