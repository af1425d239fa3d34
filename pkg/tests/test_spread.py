from itertools import combinations

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from spreadlab.errors import InvalidParams, ZeroVector
from spreadlab.spread import (SpreadQuery, best_k_sparse_error, compressible_to_distortion_bound,
                              distortion, distortion_to_compressibility, lp_norm,
                              p_spread_to_q_spread, rip_to_spread_params, top_k_support)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vectors(max_n=12):
    return st.integers(1, max_n).flatmap(lambda n: arrays(np.float64, n, elements=finite))


def exhaustive_error(x, k, p):
    """Minimum over every support of size k of the relative lp error of zeroing the rest."""
    best = np.inf
    for S in combinations(range(x.size), k):
        rest = x.copy()
        rest[list(S)] = 0.0
        best = min(best, lp_norm(rest, p))
    return best / lp_norm(x, p)


def test_best_k_trivial_cases():
    e1 = np.zeros(5)
    e1[0] = 1.0
    err, supp = best_k_sparse_error(e1, 1, 2)
    assert err == 0.0 and supp.tolist() == [0]
    err, supp = best_k_sparse_error(np.ones(4), 1, 2)
    assert err == pytest.approx(np.sqrt(3) / 2, rel=1e-15)
    assert supp.tolist() == [0]


def test_ties_break_to_smaller_index():
    assert top_k_support([1, -3, 3, 2, 3], 2).tolist() == [1, 2]


@given(vectors(), st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]), st.integers(1, 4))
def test_best_k_matches_exhaustive(x, p, k):
    assume(np.any(x) and k <= x.size)
    err, _ = best_k_sparse_error(x, k, p)
    assert err == pytest.approx(exhaustive_error(x, k, p), rel=1e-12, abs=1e-15)


def test_distortion_values():
    assert distortion(np.full(9, -2.5), 1, 2).value == pytest.approx(1.0, rel=1e-15)
    e1 = np.zeros(16)
    e1[0] = 1
    assert distortion(e1, 1, 2).value == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(ZeroVector):
        distortion(np.zeros(3), 1, 2)
    with pytest.raises(InvalidParams):
        distortion(np.ones(3), 2, 2)


@given(vectors(), st.sampled_from([(1, 2), (1, 1.5), (1.5, 2), (2, 4), (1, np.inf)]))
def test_holder_sandwich_and_distortion_range(x, qp):
    q, p = qp
    assume(np.any(x))
    n = x.size
    xp, xq = lp_norm(x, p), lp_norm(x, q)
    scale = n ** (1 / q - (0 if np.isinf(p) else 1 / p))
    assert xp <= xq * (1 + 1e-12)
    assert xq <= xp * scale * (1 + 1e-12)
    d = distortion(x, q, p).value
    assert 1 - 1e-12 <= d <= scale * (1 + 1e-12)
    assert d == pytest.approx(xp * scale / xq, rel=1e-14)


def test_compressible_bound_hand_values():
    assert compressible_to_distortion_bound(8, 8, 0.3, 1, 2) == pytest.approx(1 / 1.3)
    assert compressible_to_distortion_bound(1, 16, 0.0, 1, 2) == pytest.approx(4.0)


def test_rip_to_spread_hand_values():
    assert rip_to_spread_params(8, 0.25, 2, 16) == pytest.approx(0.75 / 2.75, rel=1e-15)
    assert rip_to_spread_params(3, 0.4, 1, 50) == pytest.approx(0.6 / 2.8, rel=1e-15)
    assert rip_to_spread_params(3, 1e-12, 2, 50) == pytest.approx(0.5, rel=1e-9)
    with pytest.raises(InvalidParams):
        rip_to_spread_params(3, 1.0, 2, 50)


def test_p_spread_to_q_spread_hand_values():
    assert p_spread_to_q_spread(16, 1.0, 2, 1, 16) == 1.0
    assert p_spread_to_q_spread(1, 0.5, 2, 1, 16) == pytest.approx(0.015625, rel=1e-15)
    qs = [1.0, 1.25, 1.5, 1.75]
    vals = [p_spread_to_q_spread(3, 0.7, 2, q, 20) for q in qs]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_reductions_hold_on_random_vectors():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 17))
        x = rng.standard_normal(n) * rng.exponential(1.0, n)
        for k in range(1, n + 1):
            for q, p in [(1, 2), (1, 1.5), (1.5, 2)]:
                err, _ = best_k_sparse_error(x, k, p)
                assert err <= distortion_to_compressibility(x, k, q, p) * (1 + 1e-12)
                bound = compressible_to_distortion_bound(k, n, err, q, p)
                assert distortion(x, q, p).value >= bound * (1 - 1e-12)


def test_spread_query():
    q = SpreadQuery(2, 1, 0.5)
    assert q.is_compressible([10.0, 0.1, 0.1])
    assert not q.is_compressible([1.0, 1.0, 1.0])
    with pytest.raises(InvalidParams):
        SpreadQuery(0.5, 1, 0.1)
