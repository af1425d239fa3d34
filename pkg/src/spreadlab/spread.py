"""Compressibility, spread and distortion of vectors, and the standard conversions between them.

Throughout, ``p = inf`` means the max-norm and ``1/p`` is taken as 0.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, ZeroVector

# relative slack used when asserting the Hoelder range of a distortion value
_RANGE_RTOL = 1e-12


def inv(p):
    """``1/p`` with ``1/inf = 0``."""
    return 0.0 if np.isinf(p) else 1.0 / p


def lp_norm(x, p):
    x = np.abs(np.asarray(x, dtype=np.float64))
    if np.isinf(p):
        return float(x.max()) if x.size else 0.0
    if p == 1:
        return float(np.sum(x))
    # scale by the largest entry so tiny or huge vectors neither underflow nor overflow
    top = float(x.max()) if x.size else 0.0
    if top == 0.0:
        return 0.0
    y = x / top
    if p == 2:
        return top * float(np.sqrt(np.sum(y * y)))
    return top * float(np.sum(y ** p) ** (1.0 / p))


def _nonzero(x):
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.any(x):
        raise ZeroVector("vector is identically zero")
    return x


@dataclass(frozen=True)
class SpreadQuery:
    p: float
    k: int
    epsilon: float

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidParams(f"p must be >= 1, got {self.p}")
        if self.k < 1:
            raise InvalidParams(f"k must be >= 1, got {self.k}")
        if not 0 <= self.epsilon <= 1:
            raise InvalidParams(f"epsilon must lie in [0, 1], got {self.epsilon}")

    def is_compressible(self, x):
        if self.k > np.size(x):
            raise InvalidParams(f"k={self.k} exceeds the dimension {np.size(x)}")
        return best_k_sparse_error(x, self.k, self.p)[0] <= self.epsilon


@dataclass(frozen=True)
class DistortionValue:
    q: float
    p: float
    value: float

    def __float__(self):
        return self.value


def top_k_support(x, k):
    """Indices of the ``k`` largest ``|x_i|``, ties to the smaller index, returned sorted."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    order = np.lexsort((np.arange(a.size), -a))
    return np.sort(order[:k])


def best_k_sparse_error(x, k, p):
    """``min ||x - y||_p / ||x||_p`` over k-sparse ``y`` and the optimal support.

    The minimum keeps the ``k`` largest magnitudes of ``x``.
    """
    x = _nonzero(x)
    if not 1 <= k <= x.size:
        raise InvalidParams(f"k must lie in [1, {x.size}], got {k}")
    if not p >= 1:
        raise InvalidParams(f"p must be >= 1, got {p}")
    supp = top_k_support(x, k)
    rest = x.copy()
    rest[supp] = 0.0
    return lp_norm(rest, p) / lp_norm(x, p), supp


def distortion(x, q, p):
    """``||x||_p * n^(1/q - 1/p) / ||x||_q``; raises if it leaves ``[1, n^(1/q - 1/p)]``."""
    x = _nonzero(x)
    if not 1 <= q < p:
        raise InvalidParams(f"need 1 <= q < p, got q={q}, p={p}")
    n = x.size
    scale = n ** (inv(q) - inv(p))
    value = lp_norm(x, p) * scale / lp_norm(x, q)
    if not (1 - _RANGE_RTOL <= value <= scale * (1 + _RANGE_RTOL)):
        raise ArithmeticError(f"distortion {value} outside [1, {scale}]")
    return DistortionValue(q, p, value)


def compressible_to_distortion_bound(k, n, eps, q, p):
    """Lower bound on the distortion of any ``(k, eps)``-lp-compressible vector."""
    return 1.0 / ((k / n) ** (inv(q) - inv(p)) + eps)


def distortion_to_compressibility(x, k, q, p):
    """An ``eps`` for which ``x`` is ``(k, eps)``-lp-compressible, read off its distortion."""
    x = _nonzero(x)
    n = x.size
    return (n / k) ** inv(q) / distortion(x, q, p).value


def rip_to_spread_params(k, eps, p, n):
    """Spread parameter of the kernel of a ``(k, eps)``-lp-RIP matrix."""
    if not 0 < eps < 1:
        raise InvalidParams(f"eps must lie in (0, 1), got {eps}")
    return (1 - eps) / (2 + eps * (1 + (2 * n / k) ** (1 - inv(p))))


def p_spread_to_q_spread(k, eps, p, q, n):
    """lq-spread parameter at sparsity ``k`` implied by ``(2k, eps)``-lp-spread."""
    if not 1 <= q < p:
        raise InvalidParams(f"need 1 <= q < p, got q={q}, p={p}")
    return eps ** 2 * (k / n) ** inv(q)
