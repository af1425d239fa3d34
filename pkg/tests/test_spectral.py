import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spreadlab.ensemble import (BipartiteGraph, EnsembleParams, SignedBipartiteMatrix,
                                SignedBiregularMatrix, sample_biregular)
from spreadlab.errors import BudgetExceeded, HypothesisViolated
from spreadlab.graphs import biregular_tree
from spreadlab.spectral import (default_z_grid, enumerate_hikes, hike_sign_sum, hike_trace_identity,
                                ihara_bass_check, ihara_bass_sides, ihara_bass_signing_sweep,
                                nomadic_eigs_from_gram, nomadic_matrix, nomadic_trace, shifted_gram,
                                singular_band_from_gram, singular_extremes, spectral_radius,
                                spectral_radius_reduction)

from conftest import complete_bipartite


def test_dense_iterative_agree():
    for seed in range(3):
        A = sample_biregular(EnsembleParams(300, 150, 6, 3, seed=seed))
        d = singular_extremes(A, "dense")
        it = singular_extremes(A, "iterative")
        assert it.sigma_min == pytest.approx(d.sigma_min, rel=1e-6)
        assert it.sigma_max == pytest.approx(d.sigma_max, rel=1e-6)


def test_double_cover_matches_svd():
    # t = s = 3, n = m: each left vertex hits 3 consecutive rows cyclically
    n = 9
    left = np.repeat(np.arange(n), 3)
    right = (left + np.tile([0, 1, 3], n)) % n
    G = BipartiteGraph(n, n, left, right)
    signs = np.where(np.arange(G.n_edges) % 4 == 0, -1, 1).astype(np.int8)
    A = SignedBiregularMatrix(G, signs, 3, 3)
    sv = np.linalg.svd(A.to_dense(), compute_uv=False)
    rep = singular_extremes(A, "dense")
    assert rep.sigma_max == pytest.approx(sv[0], rel=1e-12)
    assert rep.sigma_min == pytest.approx(sv[-1], rel=1e-12, abs=1e-12)


@given(st.integers(0, 10**6))
def test_trivial_singular_value_bounds(seed):
    A = sample_biregular(EnsembleParams(24, 12, 6, 3, seed=seed))
    rep = singular_extremes(A, "dense")
    assert math.sqrt(3) - 1e-12 <= rep.sigma_max <= math.sqrt(18) + 1e-12
    assert rep.sum_sq == pytest.approx(24 * 3, rel=1e-12)
    assert 0 <= rep.sigma_min <= rep.sigma_max
    want = max(abs(rep.sigma_min - math.sqrt(5)), abs(rep.sigma_max - math.sqrt(5))) / math.sqrt(2)
    assert rep.slack == pytest.approx(want)


def test_shifted_gram(small_matrix):
    A = small_matrix
    M = shifted_gram(A)
    assert np.all(M.diagonal() == 0)
    assert (M - M.T).nnz == 0
    lam = np.sort(np.linalg.eigvalsh(M.toarray().astype(float)))
    sv = np.sort(np.linalg.svd(A.to_dense(), compute_uv=False) ** 2 - A.s)
    np.testing.assert_allclose(lam, sv, atol=1e-10)


def test_band_transform_contains_sigma():
    for s, t in [(6, 3), (12, 4), (10, 2)]:
        for eps in (0.0, 0.1, 0.5):
            lo, hi, ep = singular_band_from_gram(s, t, eps)
            c, u = math.sqrt(s - 1), math.sqrt(t - 1)
            lam_lo = t - 2 - (2 + eps) * math.sqrt((s - 1) * (t - 1))
            lam_hi = t - 2 + (2 + eps) * math.sqrt((s - 1) * (t - 1))
            for lam in np.linspace(lam_lo, lam_hi, 101):
                sig = math.sqrt(max(lam + s, 0.0))
                assert lo - 1e-12 <= sig <= hi + 1e-12
                assert abs(sig - c) <= (1 + ep) * u + 1e-12
            assert ep >= eps / 2 - 1e-12 or eps == 0


def test_tree_nomadic_matrix_is_nilpotent():
    A, _ = biregular_tree(3, 4, 1)
    B = nomadic_matrix(A).B.toarray()
    P = np.linalg.matrix_power(B, B.shape[0])
    assert not P.any()


def test_nomadic_pair_count_and_structure():
    A = sample_biregular(EnsembleParams(6, 4, 3, 2, seed=1))
    nm = nomadic_matrix(A)
    assert nm.size == 6 * 2 * 1
    # independent walk enumeration: B[(e1,e2),(e3,e4)] nonzero iff e2 ends where e3 starts,
    # the left vertex changes and neither step reuses an edge
    G = A.graph
    B = nm.B.toarray()
    for i, (u, v, w) in enumerate(nm.index.tolist()):
        for j, (u2, v2, w2) in enumerate(nm.index.tolist()):
            ok = u2 == w and v2 != v
            assert bool(B[i, j]) == ok
            if ok:
                e3 = G.edge_index(v2, u2)[0]
                e4 = G.edge_index(v2, w2)[0]
                assert B[i, j] == int(A.signs[e3]) * int(A.signs[e4])
    assert set(np.unique(B).tolist()) <= {-1, 0, 1}


def test_nomadic_budget():
    A = sample_biregular(EnsembleParams(16, 8, 6, 3, seed=1))
    with pytest.raises(BudgetExceeded):
        nomadic_matrix(A, budget=10)


def test_ihara_bass_at_zero_and_grid():
    A = sample_biregular(EnsembleParams(8, 4, 4, 2, seed=3))
    ll, sl, lr, sr = ihara_bass_sides(A, 0.0)
    assert (ll, sl, lr, sr) == (0.0, 1.0, 0.0, 1.0)
    z = default_z_grid(4, 2)
    assert len(z) == 16 and np.all(np.abs(z) < 1 / (2 * math.sqrt(3)))
    assert ihara_bass_check(A, z) <= 1e-8


def test_ihara_bass_every_signing_of_small_graph():
    G = complete_bipartite(4, 2)
    assert ihara_bass_signing_sweep(G, 4, 2, default_z_grid(4, 2)) <= 1e-8


def test_ihara_bass_other_shapes():
    for params in [(9, 6, 3, 2), (12, 9, 4, 3)]:
        n, m, s, t = params
        A = sample_biregular(EnsembleParams(n, m, s, t, seed=2))
        assert ihara_bass_check(A, default_z_grid(s, t)) <= 1e-8


def test_gram_eigs_map_to_nomadic_eigs():
    A = sample_biregular(EnsembleParams(12, 6, 4, 2, seed=5))
    lam = np.linalg.eigvalsh(shifted_gram(A).toarray().astype(float))
    be = np.linalg.eigvals(nomadic_matrix(A).B.toarray().astype(float))
    for l in lam:
        for mu in nomadic_eigs_from_gram(l, 4, 2):
            assert np.min(np.abs(be - mu)) <= 1e-6 * max(1, abs(mu))


def test_spectral_radius_reduction():
    lo, hi = spectral_radius_reduction(0.0, 6, 3, 0.0)
    assert (lo, hi) == pytest.approx((1 - 2 * math.sqrt(10), 1 + 2 * math.sqrt(10)))
    with pytest.raises(HypothesisViolated):
        spectral_radius_reduction(1.0, 6, 3, 0.6)
    with pytest.raises(HypothesisViolated):
        spectral_radius_reduction(100.0, 6, 3, 0.1)
    checked = 0
    for seed in range(20):
        A = sample_biregular(EnsembleParams(12, 6, 4, 2, seed=seed))
        rho = spectral_radius(nomadic_matrix(A).B)
        base = math.sqrt(3)
        eps = max(rho / base - 1, 0.0)
        lam = np.linalg.eigvalsh(shifted_gram(A).toarray().astype(float))
        if eps <= 0.5:
            lo, hi = spectral_radius_reduction(rho, 4, 2, eps)
            assert lo - 1e-9 <= lam.min() and lam.max() <= hi + 1e-9
            checked += 1
        # contrapositive: an eigenvalue outside the eps-interval forces rho above (1+eps) base
        for e in (0.0, 0.1, 0.3):
            r = (2 + 4 * e * e) * base
            if lam.min() < 0 - r - 1e-9 or lam.max() > 0 + r + 1e-9:
                assert rho > (1 + e) * base - 1e-9
    assert checked > 0


def test_contrapositive_on_near_complete_instance():
    G = complete_bipartite(4, 2)
    A = SignedBiregularMatrix(G, np.ones(8, np.int8), 4, 2)
    lam = np.linalg.eigvalsh(shifted_gram(A).toarray().astype(float))
    rho = spectral_radius(nomadic_matrix(A).B)
    base = math.sqrt(3)
    assert lam.max() > 2 * base
    assert rho > base


def test_four_cycle_hikes_by_hand():
    C4 = complete_bipartite(2, 2)
    c = enumerate_hikes(C4, 1, keep_records=True)
    # 2 starts x 2 first edges x 2 choices after the midpoint reversal
    assert c.total == 8 and c.even == 4
    for h in c.records:
        verts = h.vertices(C4)
        assert len(verts) == 5 and verts[0] == verts[-1] == ("R", h.start)
        if h.even:
            assert h.edges[0] == h.edges[3] and h.edges[1] == h.edges[2]


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_hike_invariants(ell):
    G = complete_bipartite(4, 2)
    c = enumerate_hikes(G, ell, keep_records=True)
    assert c.even <= c.singleton_free <= c.total
    for h in c.records:
        mult = h.multiplicity()
        assert h.even == all(v % 2 == 0 for v in mult.values())
        if h.even:
            assert h.singleton_free
        e = h.edges
        for i in range(1, len(e)):
            if i != 2 * ell:
                assert e[i] != e[i - 1]


def test_hike_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_hikes(complete_bipartite(4, 2), 4)
    with pytest.raises(BudgetExceeded):
        enumerate_hikes(complete_bipartite(6, 3), 1)


@pytest.mark.parametrize("ell", [1, 2])
def test_trace_identity(ell):
    G = complete_bipartite(4, 2)
    total, even_special, count = hike_trace_identity(G, ell)
    assert total == even_special * count


def test_trace_equals_signed_special_hike_sum_per_signing():
    G = complete_bipartite(4, 2)
    recs = enumerate_hikes(G, 2, keep_records=True).records
    rng = np.random.default_rng(0)
    for _ in range(20):
        sg = rng.choice([-1, 1], size=8).astype(np.int8)
        B = nomadic_matrix(SignedBipartiteMatrix(G, sg)).B
        assert nomadic_trace(B, 1) == hike_sign_sum(G, 1, sg, recs)
