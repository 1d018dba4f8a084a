import math

import numpy as np
import pytest
from scipy import stats

from kacwalk.dimreduce import (
    PointCloud,
    default_steps,
    distortion_report,
    haar_jl_baseline,
    kac_jl_transform,
    stiefel_project,
)
from kacwalk.walks import WalkConfig, haar_sample, run_walk, substream


def cloud(n=16, count=20, seed=0):
    return PointCloud(substream(seed, 99).standard_normal((count, n)))


def test_zero_steps_full_dimension_is_identity():
    c = cloud()
    out = kac_jl_transform(c, c.dim, 0)
    assert np.array_equal(out.points, c.points)


def test_full_dimension_preserves_norms():
    c = cloud()
    out = kac_jl_transform(c, c.dim, 500, seed=3)
    assert np.allclose(np.linalg.norm(out.points, axis=1), np.linalg.norm(c.points, axis=1), atol=1e-12)
    rep = distortion_report(c, out)
    assert rep.epsilon < 1e-12


def test_haar_full_dimension_is_isometry():
    c = cloud()
    rep = distortion_report(c, haar_jl_baseline(c, c.dim, seed=1))
    assert rep.epsilon < 1e-12


def test_streaming_equals_dense_walk():
    c = cloud(n=12, count=7)
    t, k = 800, 5
    cfg = WalkConfig(12, "kac", seed=4, reorthonormalize_period=0)
    x = run_walk(np.eye(12), t, cfg).final
    dense = (stiefel_project(x.T, k) @ c.points.T).T * math.sqrt(12 / k)
    assert np.allclose(kac_jl_transform(c, k, t, seed=4).points, dense, atol=1e-9)


def test_projection_unbiased_in_squared_norm():
    n, k = 8, 3
    v = np.arange(1.0, n + 1)
    rng = substream(5)
    sq = []
    for x in haar_sample(n, "real", rng, 20_000):
        sq.append(np.sum((math.sqrt(n / k) * x[:k] @ v) ** 2))
    sq = np.array(sq)
    assert abs(sq.mean() - v @ v) < 4 * sq.std() / math.sqrt(sq.size)


def test_distortion_shrinks_with_k():
    c = cloud(n=32, count=15, seed=2)
    t = default_steps(32)
    eps = [np.mean([distortion_report(c, kac_jl_transform(c, k, t, seed=s)).epsilon for s in range(5)]) for k in (4, 16, 32)]
    assert eps[0] > eps[1] > eps[2]
    assert eps[2] < 1e-10


def test_stiefel_rows_orthonormal():
    x = haar_sample(6, "real", substream(6))
    p = stiefel_project(x, 4)
    assert p.shape == (4, 6)
    assert np.allclose(p @ p.T, np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        stiefel_project(x, 7)
    with pytest.raises(ValueError):
        stiefel_project(haar_sample(3, "complex", substream(6)), 1)


def test_single_row_marginal_is_uniform_on_sphere():
    # the first coordinate of a uniform unit vector in R^n has a
    # symmetric Beta((n-1)/2, (n-1)/2) law on [-1, 1]
    n = 5
    first = np.array([stiefel_project(x, 1)[0, 0] for x in haar_sample(n, "real", substream(7), 20_000)])
    law = stats.beta((n - 1) / 2, (n - 1) / 2, loc=-1, scale=2)
    assert stats.kstest(first, law.cdf).pvalue > 0.01


def test_distortion_homothety():
    c = cloud(n=4, count=6)
    rep = distortion_report(c, PointCloud(2.5 * c.points))
    assert rep.min_ratio == pytest.approx(2.5) and rep.max_ratio == pytest.approx(2.5)
    assert rep.epsilon == pytest.approx(1.5)


def test_distortion_errors():
    pts = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        distortion_report(PointCloud(pts), PointCloud(pts))
    c = cloud(n=4, count=3)
    with pytest.raises(ValueError):
        distortion_report(c, PointCloud(c.points[:2]))
    with pytest.raises(ValueError):
        kac_jl_transform(c, 0, 10)
    with pytest.raises(ValueError):
        kac_jl_transform(c, 2, -1)
    with pytest.raises(ValueError):
        PointCloud(np.zeros(3))


def test_labels_carried_through():
    c = PointCloud(np.eye(3), labels=("a", "b", "c"))
    out = kac_jl_transform(c, 2, 10)
    assert out.labels == ("a", "b", "c")
    distortion_report(c, out)


def test_default_steps():
    assert default_steps(64) == math.ceil(64**2 * math.log(math.pi * 8 / 0.1))
