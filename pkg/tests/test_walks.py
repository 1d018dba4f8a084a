import math

import numpy as np
import pytest
from scipy import integrate, stats

from kacwalk.geometry import canonical_angles, check_group_element, orthogonality_defect, planar_rotation
from kacwalk.walks import (
    TWO_PI,
    AngleDensity,
    PlanarStep,
    StepStream,
    WalkConfig,
    advance_batch,
    apply_step,
    apply_step_to_vector,
    haar_sample,
    rejection_sample,
    run_vector,
    run_walk,
    sample_density_angles,
    sample_density_step,
    sample_kac_step,
    sample_pairs,
    sample_unitary_step,
    substream,
)

M = 100_000


def test_substreams_are_reproducible_and_distinct():
    a = substream(7, 1).random(5)
    assert np.array_equal(a, substream(7, 1).random(5))
    assert not np.array_equal(a, substream(7, 2).random(5))
    assert not np.array_equal(a, substream(8, 1).random(5))


def test_single_pair_for_n2(rng):
    for _ in range(20):
        s = sample_kac_step(2, rng)
        assert (s.i, s.j) == (0, 1)


def test_step_errors(rng):
    with pytest.raises(ValueError):
        sample_kac_step(1, rng)
    with pytest.raises(ValueError):
        PlanarStep(1, 0, theta=0.1)
    with pytest.raises(ValueError):
        PlanarStep(0, 1)
    with pytest.raises(ValueError):
        PlanarStep(0, 1, u=np.ones((2, 2)))


def test_pair_frequencies_uniform():
    i, j = sample_pairs(4, M, substream(1))
    counts = np.bincount(i * 4 + j, minlength=16)[[1, 2, 3, 6, 7, 11]]
    assert counts.sum() == M
    assert stats.chisquare(counts).pvalue > 0.01


def test_kac_angles_uniform():
    _, _, theta = StepStream(5, "kac", substream(2)).arrays(M)
    assert theta.min() >= 0 and theta.max() < TWO_PI
    assert stats.kstest(theta / TWO_PI, "uniform").pvalue > 0.01


def test_uniform_density_equals_kac_in_law():
    dens = AngleDensity.uniform()
    assert dens.uniform_weight == pytest.approx(1.0)
    theta = sample_density_angles(dens, M, substream(3))
    assert stats.kstest(theta / TWO_PI, "uniform").pvalue > 0.01


def test_triangular_density_matches_integrated_cdf():
    dens = AngleDensity.triangular(0.5)
    theta = sample_density_angles(dens, M, substream(4))

    def cdf(x):
        return np.array([integrate.quad(lambda t: float(dens.evaluate(np.array([t]))[0]), 0, v)[0] for v in np.atleast_1d(x)])

    grid = np.linspace(0, TWO_PI, 401)
    table = cdf(grid)
    assert stats.kstest(theta, lambda x: np.interp(x, grid, table)).pvalue > 0.01


def test_rejection_acceptance_rate():
    dens = AngleDensity.cosine(0.4)
    _, accepted, proposed = rejection_sample(dens.evaluate, dens.rho_max, M, substream(5))
    rate = 1 / (TWO_PI * dens.rho_max)
    se = math.sqrt(rate * (1 - rate) / proposed)
    assert abs(accepted / proposed - rate) < 3 * se


def test_rejection_envelope_violation():
    with pytest.raises(ValueError):
        rejection_sample(lambda t: np.full(np.shape(t), 1.0), 0.1, 10, substream(0))


def test_density_validation():
    with pytest.raises(ValueError):
        AngleDensity(lambda t: np.full(np.shape(t), 1 / TWO_PI), 0.0, 1 / TWO_PI)
    with pytest.raises(ValueError):
        AngleDensity(lambda t: np.full(np.shape(t), 0.2), 0.2, 0.2)  # not normalised


def test_unitary_steps():
    rng = substream(6)
    phases = []
    for _ in range(2000):
        s = sample_unitary_step(3, rng)
        assert np.allclose(s.u @ s.u.conj().T, np.eye(2), atol=1e-12)
    _, _, u = StepStream(3, "unitary", substream(7)).arrays(M)
    phases = np.mod(np.angle(np.linalg.det(u)), TWO_PI)
    assert stats.kstest(phases / TWO_PI, "uniform").pvalue > 0.01


def test_density_step_sampler(rng):
    s = sample_density_step(4, AngleDensity.cosine(0.5), rng)
    assert 0 <= s.theta < TWO_PI and s.i < s.j < 4


def test_apply_step_matches_dense(rng):
    x = haar_sample(5, "real", rng)
    s = PlanarStep(1, 3, theta=0.7)
    assert np.allclose(apply_step(x, s), planar_rotation(1, 3, 0.7, 5) @ x, atol=1e-12)
    assert np.array_equal(apply_step(x, PlanarStep(1, 3, theta=0.0)), x)
    with pytest.raises(ValueError):
        apply_step(x, sample_unitary_step(5, rng))


def test_vector_step(rng):
    v = rng.standard_normal(6)
    s = PlanarStep(2, 4, theta=1.1)
    w = apply_step_to_vector(v, s)
    assert np.allclose(w, planar_rotation(2, 4, 1.1, 6) @ v, atol=1e-12)
    assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), abs=1e-13)
    assert np.array_equal(apply_step_to_vector(v, PlanarStep(2, 4, theta=0.0)), v)
    with pytest.raises(ValueError):
        apply_step_to_vector(v[:3], s)


def test_haar_sample_properties():
    xs = haar_sample(4, "real", substream(8), M)
    assert np.allclose(np.linalg.det(xs[:100]), 1.0, atol=1e-10)
    x11 = xs[:, 0, 0] ** 2
    assert abs(x11.mean() - 0.25) < 3 * x11.std() / math.sqrt(M)
    u = haar_sample(3, "complex", substream(9))
    check_group_element(u)


def test_one_step_preserves_haar():
    n = 3
    xs = haar_sample(n, "real", substream(10), 20_000)
    ys = advance_batch(haar_sample(n, "real", substream(11), 20_000), 1, "kac", substream(12))
    assert stats.ks_2samp(xs[:, 0, 0], ys[:, 0, 0]).pvalue > 0.01
    assert stats.ks_2samp(np.trace(xs, axis1=1, axis2=2), np.trace(ys, axis1=1, axis2=2)).pvalue > 0.01


def test_run_walk_basics():
    cfg = WalkConfig(3, "kac", seed=4)
    x0 = np.eye(3)
    t0 = run_walk(x0, 0, cfg)
    assert len(t0.snapshots) == 1 and np.array_equal(t0.snapshots[0][1], x0)
    a = run_walk(x0, 500, cfg, [100, 500])
    b = run_walk(x0, 500, cfg, [100, 500])
    assert [t for t, _ in a.snapshots] == [0, 100, 500]
    assert all(np.array_equal(p[1], q[1]) for p, q in zip(a.snapshots, b.snapshots))
    with pytest.raises(ValueError):
        run_walk(np.eye(4), 10, cfg)
    with pytest.raises(ValueError):
        run_walk(np.eye(3, dtype=complex), 10, cfg)


def test_run_walk_matches_step_sequence():
    cfg = WalkConfig(4, "kac", seed=9)
    x = np.eye(4)
    for s in cfg.stream(0).steps(50):
        x = apply_step(x, s)
    assert np.allclose(run_walk(np.eye(4), 50, cfg).final, x, atol=1e-12)


def test_repair_keeps_orthogonality():
    cfg = WalkConfig(5, "kac", seed=1, reorthonormalize_period=1000)
    traj = run_walk(np.eye(5), 10_000, cfg)
    assert orthogonality_defect(traj.final) <= 1e-10


def test_unitary_walk_stays_unitary():
    cfg = WalkConfig(3, "unitary", seed=2)
    traj = run_walk(np.eye(3, dtype=complex), 2000, cfg)
    check_group_element(traj.final)


def test_n2_one_step_angle_uniform():
    x = advance_batch(np.repeat(np.eye(2)[None], M, axis=0), 1, "kac", substream(13))
    angle = np.mod(np.arctan2(x[:, 1, 0], x[:, 0, 0]), TWO_PI)
    assert stats.kstest(angle / TWO_PI, "uniform").pvalue > 0.01


def test_vector_walk_energy():
    v0 = np.arange(1.0, 9.0)
    v = run_vector(v0, 100_000, seed=3)
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(v0), abs=1e-9)


def test_canonical_angle_of_walk_state():
    cfg = WalkConfig(2, "kac", seed=0)
    x = run_walk(np.eye(2), 1, cfg).final
    (theta,) = canonical_angles(x).angles
    assert np.allclose(planar_rotation(0, 1, theta, 2), x)
