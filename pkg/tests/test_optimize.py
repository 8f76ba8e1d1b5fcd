import numpy as np
import pytest

from tomocal.optimize import (SearchTrace, global_search, householder_basis, latin_hypercube,
                              mesh_adaptive_search, nelder_mead)


def quad(x):
    return float(np.sum((np.asarray(x) - 0.3) ** 2))


def test_latin_hypercube_strata():
    pts = latin_hypercube(20, [-1, 0], [1, 5], seed=1)
    assert pts.shape == (20, 2)
    for k, (lo, hi) in enumerate([(-1, 1), (0, 5)]):
        bins = np.floor((pts[:, k] - lo) / (hi - lo) * 20).astype(int)
        assert sorted(bins) == list(range(20))
    assert np.array_equal(pts, latin_hypercube(20, [-1, 0], [1, 5], seed=1))


def test_householder_is_orthonormal():
    h = householder_basis(np.random.default_rng(0), 5)
    assert np.allclose(h @ h.T, np.eye(5))


def test_mesh_search_finds_quadratic_minimum():
    tr = SearchTrace(10_000)
    x, fx, ok = mesh_adaptive_search(quad, np.zeros(3), -np.ones(3), np.ones(3), tr, mesh_min=1e-8)
    assert ok
    assert np.allclose(x, 0.3, atol=1e-6)
    assert tr.evaluations <= 10_000


def test_mesh_search_respects_bounds_and_budget():
    tr = SearchTrace(50)
    x, fx, ok = mesh_adaptive_search(lambda v: -float(np.sum(v)), np.zeros(2), -np.ones(2),
                                     np.ones(2), tr)
    assert not ok
    assert tr.evaluations == 50
    assert np.all(x <= 1) and np.all(x >= -1)


def test_trace_best_so_far_is_monotone():
    x, fx, tr, ok = global_search(quad, -np.ones(4), np.ones(4), lh_samples=50,
                                  max_evaluations=3000, local_starts=2, mesh_initial=0.1,
                                  mesh_min=1e-6, seed=3)
    vals = [v for _, v in tr.trace]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert fx == vals[-1] == pytest.approx(quad(x))


def test_global_search_is_deterministic():
    args = dict(lh_samples=30, max_evaluations=800, local_starts=3, mesh_initial=0.1,
                mesh_min=1e-6, seed=9)
    a = global_search(quad, -np.ones(3), np.ones(3), **args)
    b = global_search(quad, -np.ones(3), np.ones(3), **args)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] and a[2].trace == b[2].trace


def test_global_search_multimodal():
    # tilted double well per coordinate; the global minimum sits at +0.7
    def wells(x):
        x = np.asarray(x)
        return float(np.sum(np.minimum((x - 0.7) ** 2, (x + 0.7) ** 2 + 0.1)))

    x, fx, tr, ok = global_search(wells, -np.ones(3), np.ones(3), lh_samples=200,
                                  max_evaluations=5000, local_starts=4, mesh_initial=0.05,
                                  mesh_min=1e-7, seed=0)
    assert np.allclose(x, 0.7, atol=1e-5)
    assert fx < 1e-9


def test_polish_reaches_kinked_minimum():
    # a max-of-hinges cost with a smooth companion sharing its zero set
    def cost(x):
        x = np.asarray(x)
        return float(np.max(np.abs(x - 0.1)) + abs(x[0] - x[1]) * 0.5)

    def polish(x):
        return cost(x), float(np.sum((np.asarray(x) - 0.1) ** 2))

    x, fx, tr, ok = global_search(cost, -np.ones(3), np.ones(3), lh_samples=20,
                                  max_evaluations=20_000, local_starts=1, mesh_initial=0.1,
                                  mesh_min=1e-9, seed=1, polish=polish)
    assert fx < 1e-6


def test_nelder_mead_bounded():
    tr = SearchTrace(2000)
    x, fx, ok = nelder_mead(lambda v: float(np.sum((np.asarray(v) - 2.0) ** 2)), [0, 0], [-1, -1],
                            [1, 1], tr)
    assert np.allclose(x, 1.0, atol=1e-6)
    assert tr.evaluations <= 2000
