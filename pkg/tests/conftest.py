import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spreadlab import _accel
from spreadlab.ensemble import BipartiteGraph, EnsembleParams, SignedBiregularMatrix, sample_biregular

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


def complete_bipartite(n_left, n_right):
    left = np.repeat(np.arange(n_left), n_right)
    right = np.tile(np.arange(n_right), n_left)
    return BipartiteGraph(n_left, n_right, left, right)


def signed(G, s, t, signs=None):
    if signs is None:
        signs = np.ones(G.n_edges, np.int8)
    return SignedBiregularMatrix(G, signs, s, t)


@pytest.fixture
def k42():
    return complete_bipartite(4, 2)


@pytest.fixture
def small_matrix():
    return sample_biregular(EnsembleParams(16, 8, 6, 3, seed=7))


def rook_lines(q, n_lines):
    """Left vertices are ``n_lines`` lines (rows first, then columns) of a ``q x q`` grid, right vertices its cells.

    Two lines share at most one cell, so ``|U(S)| >= q|S| - |S|(|S|-1)``.
    """
    left, right = [], []
    for i in range(n_lines):
        if i < q:
            cells = [i * q + j for j in range(q)]
        else:
            c = i - q
            cells = [j * q + c for j in range(q)]
        left += [i] * q
        right += cells
    return BipartiteGraph(n_lines, q * q, left, right)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
