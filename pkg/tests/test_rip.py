import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spreadlab.ensemble import BipartiteGraph, EnsembleParams, SignedBipartiteMatrix, sample_biregular
from spreadlab.errors import HypothesisViolated, InvalidDelta, PreconditionFailed
from spreadlab.graphs import ExpansionCertificate, unique_neighbors, verify_unique_expansion
from spreadlab.rip import (best_delta1, certify_rip, disjoint_unique_neighbor_sets, explicit_pipeline,
                           probe_rip, rip_bounds_from_expansion, rip_precondition,
                           smallest_admissible_eps, weak_l2_bound)

from conftest import rook_lines


@given(st.integers(1, 64), st.integers(1, 128), st.floats(0, 0.99), st.floats(1e-3, 10), st.floats(1e-3, 0.999))
def test_p1_closed_form_exact(t, s_max, mu, d1, d2):
    assert rip_bounds_from_expansion(t, s_max, mu, 1, d1, d2) == (t * (1 - 2 * mu), t * (1 + mu))


def test_p1_hand_values():
    lo, hi = rip_bounds_from_expansion(5, 10, 0.1, 1, 0.3, 0.3)
    assert lo == pytest.approx(4.0, rel=1e-15) and hi == pytest.approx(5.5, rel=1e-15)


@given(st.integers(1, 64), st.integers(1, 128), st.floats(1, 3), st.floats(1e-3, 10), st.floats(1e-3, 0.999))
def test_mu_zero_lower_coefficient(t, s_max, p, d1, d2):
    lo, hi = rip_bounds_from_expansion(t, s_max, 0.0, p, d1, d2)
    assert lo == pytest.approx(t / (1 + d1) ** (p - 1), rel=1e-14)
    assert hi == pytest.approx(t / (1 - d2) ** (p - 1), rel=1e-14)


def test_general_p_against_hand_formula():
    t, s, mu, p, d1, d2 = 7, 9, 0.05, 1.5, 0.2, 0.4
    lo, hi = rip_bounds_from_expansion(t, s, mu, p, d1, d2)
    assert lo == pytest.approx(7 * 0.95 / 1.2 ** 0.5 - 0.05 * 7 / 0.2 ** 0.5 * 8 ** 0.5, rel=1e-14)
    assert hi == pytest.approx(7 / 0.6 ** 0.5 + 0.05 * 7 / 0.4 ** 0.5 * 8 ** 0.5, rel=1e-14)


def test_p2_lower_can_be_trivial():
    lo, _ = rip_bounds_from_expansion(4, 20, 0.25, 2, 0.5, 0.5)
    assert lo <= 0


def test_invalid_deltas():
    with pytest.raises(InvalidDelta):
        rip_bounds_from_expansion(3, 4, 0.1, 1.5, 0.0, 0.5)
    with pytest.raises(InvalidDelta):
        rip_bounds_from_expansion(3, 4, 0.1, 1.5, 0.5, 1.0)


def test_best_delta1_is_a_maximizer():
    t, s, mu, p = 8, 16, 0.01, 1.5
    d = best_delta1(t, s, mu, p)
    f = lambda x: rip_bounds_from_expansion(t, s, mu, p, x, 0.5)[0]
    grid = np.geomspace(1e-4, 1e4, 4001)
    assert f(d) >= max(f(x) for x in grid) - 1e-9


def cert(mu, k=3, n=30, t=4, mode="exhaustive"):
    return ExpansionCertificate(gamma=k / n, mu=mu, max_set_size_checked=k, mode=mode, n=n, t=t)


def test_certify_trivial_and_preconditions():
    rc = certify_rip(cert(0.0), 4, 50, 1.5, 1.0)
    assert rc.K == pytest.approx(4 ** (1 / 1.5)) and rc.k == 3
    assert (rc.lower, rc.upper) == pytest.approx((0.0, 2 * rc.K))
    with pytest.raises(PreconditionFailed, match="9"):
        certify_rip(cert(0.1), 4, 50, 1.5, 0.5)
    with pytest.raises(PreconditionFailed):
        certify_rip(cert(0.0, mode="sampled"), 4, 50, 1.5, 0.5)
    bad = cert(0.0)
    bad.counterexample = [1, 2]
    with pytest.raises(PreconditionFailed):
        certify_rip(bad, 4, 50, 1.5, 0.5)


def test_random_graph_regime_matches_degree_condition():
    # mu = 2/t and t = alpha s turn the precondition into s >= (18/(alpha eps^2))^(1/(2-p))
    for alpha in (0.1, 0.25, 0.5):
        for p in (1.0, 1.2, 1.5, 1.8):
            for eps in (0.3, 0.6, 0.9):
                for s in range(10, 4000, 37):
                    t = alpha * s
                    lhs = eps * eps >= rip_precondition(2 / t, s, p)
                    rhs = s >= (18 / (alpha * eps * eps)) ** (1 / (2 - p))
                    margin = abs(s - (18 / (alpha * eps * eps)) ** (1 / (2 - p)))
                    if margin > 1e-6 * s:
                        assert lhs == rhs


def test_smallest_admissible_eps_example():
    need = rip_precondition(0.002, 64, 1.2)
    assert need == pytest.approx(9 * 0.002 * 64 ** 0.2, rel=1e-14)
    eps = smallest_admissible_eps(0.002, 64, 1.2)
    assert eps * eps >= need and math.nextafter(eps, 0) ** 2 < need
    rc = certify_rip(cert(0.002, n=1000, t=16), 16, 64, 1.2, eps)
    assert rc.lower_coeff >= (1 - eps) * 16 - 1e-9 and rc.upper_coeff <= (1 + eps) * 16 + 1e-9


def test_certificate_brackets_hold_on_grid():
    for mu in (0.0, 0.001, 0.01):
        for p in (1.0, 1.3, 1.7):
            for s in (2, 8, 32):
                eps = max(smallest_admissible_eps(mu, s, p), 0.05)
                if eps > 1:
                    continue
                rc = certify_rip(cert(mu), 4, s, p, eps)
                assert rc.lower_coeff >= (1 - eps) * 4 - 1e-9
                assert rc.upper_coeff <= (1 + eps) * 4 + 1e-9


def test_probe_k1_is_exact():
    A = sample_biregular(EnsembleParams(16, 8, 6, 3, seed=2))
    for p in (1.0, 1.5, 2.0):
        pr = probe_rip(A, p, 1, restarts=2)
        assert pr.min_ratio == pytest.approx(3 ** (1 / p), rel=1e-12)
        assert pr.max_ratio == pytest.approx(3 ** (1 / p), rel=1e-12)


def test_probe_p2_matches_submatrix_svd():
    A = sample_biregular(EnsembleParams(16, 8, 6, 3, seed=4))
    D = A.to_dense()
    lo, hi = np.inf, -np.inf
    for S in combinations(range(16), 3):
        sv = np.linalg.svd(D[:, list(S)], compute_uv=False)
        lo, hi = min(lo, sv[-1]), max(hi, sv[0])
    pr = probe_rip(A, 2.0, 3)
    assert pr.min_ratio == pytest.approx(lo, abs=1e-12)
    assert pr.max_ratio == pytest.approx(hi, abs=1e-12)
    assert pr.supports_checked == 560


def grid_extremes(cols, p, count=100000):
    th = np.linspace(0, 2 * np.pi, count, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    x = np.stack([np.sign(c) * np.abs(c) ** (2 / p), np.sign(s) * np.abs(s) ** (2 / p)])
    x /= (np.abs(x) ** p).sum(axis=0) ** (1 / p)
    r = (np.abs(cols @ x) ** p).sum(axis=0) ** (1 / p)
    return r.min(), r.max()


def test_probe_p15_matches_grid_search():
    A = sample_biregular(EnsembleParams(12, 6, 4, 2, seed=1))
    D = A.to_dense()
    pr = probe_rip(A, 1.5, 2, restarts=16)
    lo, hi = np.inf, -np.inf
    for S in combinations(range(12), 2):
        a, b = grid_extremes(D[:, list(S)], 1.5)
        lo, hi = min(lo, a), max(hi, b)
    assert abs(pr.min_ratio - lo) <= 1e-3
    assert abs(pr.max_ratio - hi) <= 1e-3


def test_probe_backends_agree():
    from spreadlab import _accel

    A = sample_biregular(EnsembleParams(10, 5, 4, 2, seed=3))
    prev = _accel.set_backend("numba")
    try:
        a = probe_rip(A, 1.5, 2, restarts=4, seed=1)
        _accel.set_backend("numpy")
        b = probe_rip(A, 1.5, 2, restarts=4, seed=1)
    finally:
        _accel.set_backend(prev)
    assert a.min_ratio == pytest.approx(b.min_ratio, rel=1e-9)
    assert a.max_ratio == pytest.approx(b.max_ratio, rel=1e-9)


def test_rook_grid_soundness():
    G = rook_lines(13, 24)
    A = SignedBipartiteMatrix(G, np.ones(G.n_edges, np.int8))
    c = verify_unique_expansion(G, 13, 2 / 24, 1 / 13)
    assert c.valid
    for p in (1.0, 1.5):
        eps = smallest_admissible_eps(1 / 13, 2, p)
        rc = certify_rip(c, 13, 2, p, eps)
        pr = probe_rip(A, p, 2, restarts=8)
        assert pr.min_ratio >= rc.lower - 1e-9 and pr.max_ratio <= rc.upper + 1e-9


def right_stars(n, m):
    return BipartiteGraph(n, m, np.arange(n), np.arange(n) % m)


def test_pipeline_on_stars(tmp_path):
    from spreadlab.fileio import write_graph

    G = right_stars(64, 16)
    write_graph(tmp_path / "stars.txt", G)
    res = explicit_pipeline(tmp_path / "stars.txt", alpha=0.25, p=1.5, eps=0.2, gamma=1 / 64, mu=0.0)
    direct = certify_rip(res.expansion, 1, int(res.graph.right_degrees.max()), 1.5, 0.2)
    assert res.certificate.to_dict() == direct.to_dict()
    assert res.alpha_ok
    assert np.all(res.matrix.signs == 1)
    pr = probe_rip(res.matrix, 1.5, res.certificate.k, restarts=4)
    assert pr.min_ratio >= res.certificate.lower - 1e-9 and pr.max_ratio <= res.certificate.upper + 1e-9


def test_pipeline_rejects_bad_claims():
    A = sample_biregular(EnsembleParams(24, 12, 4, 2, seed=0))
    with pytest.raises(PreconditionFailed):
        explicit_pipeline(A.graph, alpha=0.5, p=1.0, eps=0.5, gamma=2 / 24, mu=0.0)


def test_weak_l2_bound():
    t = 9
    assert weak_l2_bound(t, 0.2, 0.2, 1000, math.sqrt(t)) == pytest.approx(3 / (2 * math.sqrt(2)))
    a = [weak_l2_bound(t, 0.2, 0.2, 1000, x) for x in (3.5, 4, 6, 10)]
    assert all(x >= y for x, y in zip(a, a[1:]))
    b = [weak_l2_bound(t, 0.2, 0.2, n, 5.0) for n in (100, 1000, 10000)]
    assert all(x >= y for x, y in zip(b, b[1:]))
    with pytest.raises(HypothesisViolated):
        weak_l2_bound(t, 0.2, 0.3, 1000, 5.0)
    with pytest.raises(HypothesisViolated):
        weak_l2_bound(t, 0.5, 0.2, 1000, 5.0)
    with pytest.raises(HypothesisViolated):
        weak_l2_bound(t, 0.2, 0.2, 10, 5.0)


def test_disjoint_unique_neighbor_sets():
    G = rook_lines(13, 24)
    gamma, k = 6 / 24, 2
    c = verify_unique_expansion(G, 13, gamma, 1.0)
    mu = c.worst_mu
    rng = np.random.default_rng(0)
    for _ in range(50):
        b = int(rng.integers(1, 4))
        perm = rng.permutation(24)
        sets = [sorted(perm[i * k:(i + 1) * k].tolist()) for i in range(b)]
        T = disjoint_unique_neighbor_sets(G, sets)
        for i, Ti in enumerate(T):
            assert len(Ti) >= (1 - mu * b) * 13 * k - 1e-9
            for r in Ti:
                nb = set(G.right_neighbors(r).tolist())
                assert len(nb & set(sets[i])) == 1
                assert all(not (nb & set(Sj)) for j, Sj in enumerate(sets) if j != i)
            for Tj in T[i + 1:]:
                assert not set(Ti) & set(Tj)
