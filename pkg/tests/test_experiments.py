import math

import numpy as np
import pytest
from scipy.special import betainc

from kacwalk import experiments as ex
from kacwalk.geometry import geodesic_distance, hs_distance, planar_rotation
from kacwalk.walks import AngleDensity


def test_mixing_time_bound_formula():
    assert ex.mixing_time_bound(3, 0.1) == 36


def test_pairs_at_distance_exact():
    x, y = ex.pairs_at_distance(4, "real", 0.02, 50, np.random.default_rng(0))
    assert np.allclose(geodesic_distance(x, y), 0.02, atol=1e-12)
    u, v = ex.pairs_at_distance(3, "complex", 0.02, 50, np.random.default_rng(1))
    assert np.allclose(geodesic_distance(u, v), 0.02, atol=1e-12)


def test_probe_rejects_large_r():
    with pytest.raises(ValueError):
        ex.local_contraction_probe(3, "kac", 0.06, 10)


def test_probe_n2_contracts_fully():
    rep = ex.local_contraction_probe(2, "kac", 1e-3, 2000, seed=1)
    assert rep.mean_ratio < 1e-10
    assert rep.predicted == 0.0


def test_probe_n4():
    rep = ex.local_contraction_probe(4, "kac", 1e-3, 20_000, seed=2)
    assert rep.stderr > 0
    assert abs(rep.mean_ratio - 5 / 6) <= rep.tolerance()


def test_probe_density_kernel():
    dens = AngleDensity.cosine(0.5)
    rep = ex.local_contraction_probe(3, "density", 1e-3, 20_000, seed=3, density=dens)
    assert rep.predicted == pytest.approx(5 / 6)
    assert abs(rep.mean_ratio - 5 / 6) <= rep.tolerance()


def test_probe_small_r_limit():
    a = ex.local_contraction_probe(3, "kac", 1e-2, 20_000, seed=4)
    b = ex.local_contraction_probe(3, "kac", 1e-3, 20_000, seed=5)
    assert abs(a.mean_ratio - b.mean_ratio) <= 10 * 1e-2 + 6 * max(a.stderr, b.stderr)


def test_probe_trials_per_pair_and_threads():
    a = ex.local_contraction_probe(3, "kac", 1e-3, 5000, trials_per_pair=3, seed=6, threads=1)
    b = ex.local_contraction_probe(3, "kac", 1e-3, 5000, trials_per_pair=3, seed=6, threads=4)
    assert a == b
    assert a.trials == 15_000
    single = ex.local_contraction_probe(3, "kac", 1e-3, 1, trials_per_pair=5, seed=6)
    assert single.stderr > 0


def test_decay_zero_distance_curve():
    curve = ex.simulate_decay(3, "kac", 30, 50, seed=1, d0=0.0)
    assert np.all(curve.d2 <= ex.noise_floor(3))
    with pytest.raises(ex.DegenerateWindowError):
        ex.coupled_decay_curve(3, "kac", 30, 50, seed=1, d0=0.0)


def test_decay_rejects_large_start():
    with pytest.raises(ValueError):
        ex.simulate_decay(3, "kac", 10, 10, d0=0.2)


def test_decay_mean_nonincreasing_early():
    curve = ex.simulate_decay(3, "kac", 10, 4000, seed=2, d0=0.05)
    m, se = curve.mean, curve.stderr
    assert np.all(np.diff(m) <= 3 * se[1:])


def test_decay_reproducible_and_thread_independent():
    a = ex.coupled_decay_curve(3, "kac", 40, 2000, seed=3, threads=1)
    b = ex.coupled_decay_curve(3, "kac", 40, 2000, seed=3, threads=3)
    assert a.slope == b.slope and a.ci_low == b.ci_low
    assert a.ci_low <= a.slope <= a.ci_high


def test_fit_window_rules():
    mean = np.array([1.0, 0.5, 0.25, 1e-40, 0.1])
    se = np.zeros(5)
    assert ex.fit_window(mean, se, 3) == 2
    se = np.array([0.0, 0.01, 0.2, 0.0, 0.0])
    assert ex.fit_window(mean, se, 3, rel_se_max=0.1) == 1


def test_mixing_curve_start_far_from_haar():
    c = ex.mixing_curve(3, "kac", (0, 1), 60, "D", 2, seed=1, replicates=5)
    assert c.baseline > 0 and c.baseline_spread > 0
    z = c.spreads_above()
    assert z[0] > 10
    assert c.estimates[0] > c.estimates[1]
    assert c.sample_size == 60 and c.metric == "D"


def test_mixing_curve_limits():
    with pytest.raises(ValueError):
        ex.mixing_curve(3, "kac", (0,), 501)
    with pytest.raises(ValueError):
        ex.mixing_curve(3, "kac", (0,), 10, replicates=1)


def test_mixing_curve_unitary_runs():
    c = ex.mixing_curve(2, "unitary", (0, 5), 30, "D", 2, seed=2, replicates=3)
    assert len(c.estimates) == 2


def test_diameter_probe():
    rep = ex.diameter_probe(4, 3000, seed=1)
    assert rep.max_observed <= rep.bound + 1e-9
    assert rep.worst_case_distance == pytest.approx(2 * (math.pi - 1e-6), abs=1e-9)
    rep2 = ex.diameter_probe(2, 3000, seed=1)
    assert rep2.max_observed <= math.pi * math.sqrt(2) + 1e-9
    assert rep2.worst_case_distance == pytest.approx(math.sqrt(2) * (math.pi - 1e-6), abs=1e-9)
    assert ex.diameter_probe(3, 10, seed=1).worst_case_distance is None


def test_planar_sandwich_gap_closed_form():
    r = planar_rotation(0, 1, 0.3, 3)
    gap = geodesic_distance(np.eye(3), r) - hs_distance(np.eye(3), r)
    expected = math.sqrt(2) * 0.3 - 2 * math.sqrt(2) * math.sin(0.15)
    assert gap == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.5892e-3, abs=1e-7)


def test_sandwich_probe_bounds():
    rep = ex.metric_sandwich_probe(4, 300, (0.05, 0.2, 0.5), seed=1)
    assert rep.hs_below_geodesic
    for row in rep.rows:
        assert row.c_hs <= 1.0 and row.c_tangent <= 1.0
    # the normal component of z - id is genuinely quadratic
    assert rep.stability("c_normal") < 0.2
    assert rep.stability("c_hs_cubic") < 0.2
    with pytest.raises(ValueError):
        ex.metric_sandwich_probe(4, 10, (0.6,))


def test_ball_volume_edges_and_monotonicity():
    n = 4
    full = ex.ball_volume_mc(n, 2 * math.sqrt(n), 5000, seed=1)
    assert full.estimate == 1.0
    empty = ex.ball_volume_mc(n, 0.0, 5000, seed=1)
    assert empty.estimate == 0.0 and empty.ci_high > 0 and math.isinf(empty.packing_bound)
    curve = ex.ball_volume_curve(n, [0.5, 1.0, 1.5, 2.0, 2.5, 3.0], 20_000, seed=2)
    est = [e.estimate for e in curve]
    assert est == sorted(est)
    assert all(e.ci_low <= e.estimate <= e.ci_high for e in curve)
    with pytest.raises(ValueError):
        ex.ball_volume_mc(2, 1.0, 10)


def test_ball_constant_fit():
    ests = ex.ball_volume_curve(4, [1.5, 2.0, 2.5], 20_000, seed=3)
    phi, psi = ex.fit_ball_constants(ests)
    assert psi > 0 and math.isfinite(phi)


def test_cap_volume():
    m, tau = 12, 0.6
    exact = 0.5 * betainc(m / 2, 0.5, 1 - tau * tau)
    e = ex.cap_volume_mc(m, tau, 200_000, seed=1)
    assert abs(e.estimate - exact) <= 4 * e.stderr
    lo, hi = e.bracket
    assert lo <= exact <= hi
    assert ex.cap_volume_mc(m, 1.0, 1000, seed=1).estimate == 0.0
    with pytest.raises(ValueError):
        ex.cap_volume_mc(2, 2 / math.sqrt(2), 100)
    with pytest.raises(ValueError):
        ex.cap_volume_mc(20, 0.3, 100)


def test_lower_bound_trivial_and_fixed_point():
    assert ex.lower_bound_calculator(6, 0.3, math.log(2)).bound == 0
    lb = ex.lower_bound_calculator(10, 0.3, 20.0)
    c = math.pi * 100 / 0.3
    assert lb.value == pytest.approx((20.0 - math.log(2)) / math.log(c * lb.value), rel=1e-10)
    assert lb.bound == math.floor(lb.value)
    h = np.array(lb.history)
    even, odd = h[0::2], h[1::2]
    assert np.all(np.diff(even) <= 1e-15) or np.all(np.diff(even) >= -1e-15)
    assert np.all(np.diff(odd) <= 1e-15) or np.all(np.diff(odd) >= -1e-15)
    # the fixed point lies between consecutive iterates
    for a, b in zip(h[1:], h[2:]):
        assert min(a, b) - 1e-12 <= lb.value <= max(a, b) + 1e-12


@pytest.mark.parametrize("n,eps,lnp", [(3, 0.1, 5.0), (6, 0.5, 50.0), (20, 0.01, 300.0), (8, 1.0, 1.0)])
def test_lower_bound_converges(n, eps, lnp):
    lb = ex.lower_bound_calculator(n, eps, lnp)
    assert lb.iterations <= 100 and lb.value > 0


def test_lower_bound_non_convergence():
    with pytest.raises(ex.ConvergenceError) as err:
        ex.lower_bound_calculator(10, 0.3, 20.0, max_iter=2)
    assert err.value.last > 0
