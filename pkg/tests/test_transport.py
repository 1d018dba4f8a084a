import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from kacwalk.geometry import geodesic_distance, hs_distance
from kacwalk.transport import (
    EmpiricalMeasure,
    cost_matrix,
    dual_lower_bound,
    empirical_wasserstein,
    solve_assignment,
)
from kacwalk.walks import haar_sample, substream


def brute_force(c):
    """Minimal cost and the lexicographically first permutation attaining it."""
    n = c.shape[0]
    perms = np.array(list(itertools.permutations(range(n))))
    costs = c[np.arange(n), perms].sum(axis=1)
    best = costs.min()
    first = np.flatnonzero(costs <= best + 1e-12)[0]
    return best, perms[first]


def test_two_by_two_example():
    a = solve_assignment(np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert list(a.permutation) == [0, 1] and a.total_cost == 2.0


def test_zero_diagonal_gives_identity():
    c = np.full((5, 5), 100.0)
    np.fill_diagonal(c, 0.0)
    a = solve_assignment(c)
    assert list(a.permutation) == list(range(5)) and a.total_cost == 0.0


@pytest.mark.parametrize("n", range(1, 8))
def test_matches_brute_force_continuous(n):
    rng = substream(1, n)
    for _ in range(30):
        c = rng.random((n, n))
        best, perm = brute_force(c)
        a = solve_assignment(c)
        assert a.total_cost == pytest.approx(best, abs=1e-12)
        assert list(a.permutation) == list(perm)


@pytest.mark.parametrize("n", range(2, 8))
def test_lexicographic_tie_breaking(n):
    rng = substream(2, n)
    for _ in range(30):
        c = rng.integers(0, 3, size=(n, n)).astype(float)
        best, perm = brute_force(c)
        a = solve_assignment(c)
        assert a.total_cost == best
        assert list(a.permutation) == list(perm)


def test_all_ties_gives_identity():
    assert list(solve_assignment(np.zeros((40, 40))).permutation) == list(range(40))


def test_matches_scipy_on_larger_instances():
    rng = substream(3)
    for n in (30, 120):
        c = rng.random((n, n))
        r, col = linear_sum_assignment(c)
        assert solve_assignment(c).total_cost == pytest.approx(c[r, col].sum(), abs=1e-9)


def test_assignment_errors():
    with pytest.raises(ValueError):
        solve_assignment(np.ones((2, 3)))
    with pytest.raises(ValueError):
        solve_assignment(np.array([[1.0, np.inf], [0.0, 1.0]]))


def test_cost_matrix_entries():
    rng = substream(4)
    a = EmpiricalMeasure(haar_sample(3, "real", rng, 5))
    b = EmpiricalMeasure(haar_sample(3, "real", rng, 5))
    cm = cost_matrix(a, b, "D", 2)
    for i, j in [(0, 0), (1, 3), (4, 2)]:
        assert cm.values[i, j] == pytest.approx(geodesic_distance(a.samples[i], b.samples[j]) ** 2, abs=1e-12)
    hs = cost_matrix(a, b, "hs", 1)
    assert hs.values[2, 1] == pytest.approx(hs_distance(a.samples[2], b.samples[1]), abs=1e-12)
    same = cost_matrix(a, a, "D", 1)
    assert np.allclose(np.diag(same.values), 0.0, atol=1e-7)
    with pytest.raises(ValueError):
        cost_matrix(a, b, "D", 0.5)
    with pytest.raises(ValueError):
        cost_matrix(a, EmpiricalMeasure(b.samples[:3]), "D", 1)
    with pytest.raises(ValueError):
        cost_matrix(a, b, "frobenius", 1)


def test_singletons():
    rng = substream(5)
    x, y = haar_sample(4, "real", rng, 2)
    d = geodesic_distance(x, y)
    ax, ay = EmpiricalMeasure(x), EmpiricalMeasure(y)
    assert cost_matrix(ax, ay, "D", 2).values.shape == (1, 1)
    assert empirical_wasserstein(ax, ay, "D", 2) == pytest.approx(d, abs=1e-12)
    assert empirical_wasserstein(ax, ay, "D", 1) == pytest.approx(d, abs=1e-12)
    assert dual_lower_bound(ax, ay, "D", anchors=x) == pytest.approx(d, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12), st.sampled_from(["hs", "D"]))
def test_primal_dual_sandwich(seed, n_samples, metric):
    rng = np.random.default_rng(seed)
    a = EmpiricalMeasure(haar_sample(3, "real", rng, n_samples))
    b = EmpiricalMeasure(haar_sample(3, "real", rng, n_samples))
    w1 = empirical_wasserstein(a, b, metric, 1)
    w2 = empirical_wasserstein(a, b, metric, 2)
    assert dual_lower_bound(a, b, metric) <= w1 + 1e-10
    assert w1 <= w2 + 1e-10
    assert empirical_wasserstein(b, a, metric, 2) == pytest.approx(w2, abs=1e-9)
    assert empirical_wasserstein(a, a, metric, 2) == pytest.approx(0.0, abs=1e-6)


def test_triangle_inequality():
    rng = substream(6)
    for _ in range(10):
        a, b, c = (EmpiricalMeasure(haar_sample(3, "real", rng, 8)) for _ in range(3))
        ab = empirical_wasserstein(a, b, "D", 2)
        bc = empirical_wasserstein(b, c, "D", 2)
        ac = empirical_wasserstein(a, c, "D", 2)
        assert ac <= ab + bc + 1e-9


def test_zero_iff_same_multiset():
    rng = substream(7)
    s = haar_sample(3, "real", rng, 6)
    a = EmpiricalMeasure(s)
    b = EmpiricalMeasure(s[::-1])
    assert empirical_wasserstein(a, b, "hs", 2) == pytest.approx(0.0, abs=1e-12)
    c = EmpiricalMeasure(np.concatenate([s[:5], haar_sample(3, "real", rng, 1)]))
    assert empirical_wasserstein(a, c, "hs", 2) > 1e-3


@pytest.mark.parametrize("metric", ["hs", "D"])
def test_left_invariance(metric):
    rng = substream(8)
    a = EmpiricalMeasure(haar_sample(4, "real", rng, 15))
    b = EmpiricalMeasure(haar_sample(4, "real", rng, 15))
    g = haar_sample(4, "real", rng)
    w = empirical_wasserstein(a, b, metric, 2)
    assert empirical_wasserstein(a.left_multiply(g), b.left_multiply(g), metric, 2) == pytest.approx(w, abs=1e-9)


def test_unitary_samples():
    rng = substream(9)
    a = EmpiricalMeasure(haar_sample(2, "complex", rng, 10))
    b = EmpiricalMeasure(haar_sample(2, "complex", rng, 10))
    assert dual_lower_bound(a, b, "D") <= empirical_wasserstein(a, b, "D", 1) + 1e-10
    with pytest.raises(ValueError):
        dual_lower_bound(a, b, "D", anchors=np.empty((0, 2, 2)))
