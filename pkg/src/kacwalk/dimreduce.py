"""Distance-preserving dimension reduction with Kac rotations.

A random rotation followed by keeping the first ``k`` coordinates (scaled by
``sqrt(n/k)``) approximately preserves all pairwise distances of a small
point set. Replacing the exact Haar rotation by ``t`` steps of Kac's walk
gives a streaming transform: each step touches two coordinates of every
point and needs no n x n matrix.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .geometry import REAL, check_group_element
from .walks import BLOCK, StepStream, haar_sample, substream


@dataclass(frozen=True)
class PointCloud:
    """``points`` has one row per point; ``labels`` (optional) names them."""

    points: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a nonempty 2-D array, got shape {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != pts.shape[0]:
                raise ValueError("one label per point required")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DistortionReport:
    min_ratio: float
    max_ratio: float
    k: int | None = None
    t: int | None = None
    seed: int | None = None

    @property
    def epsilon(self) -> float:
        """``max(|max_ratio - 1|, |1 - min_ratio|)``."""
        return max(abs(self.max_ratio - 1.0), abs(1.0 - self.min_ratio))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon"] = self.epsilon
        return d


def default_steps(n: int, eps: float = 0.1) -> int:
    """``ceil(n^2 ln(pi sqrt(n) / eps))``, the mixing-time bound for SO(n)."""
    return math.ceil(n * n * math.log(math.pi * math.sqrt(n) / eps))


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"target dimension k must lie in [1, {n}], got {k}")


def kac_jl_transform(cloud: PointCloud, k: int, t: int, seed: int = 0) -> PointCloud:
    """Apply ``t`` shared Kac steps to every point, keep ``k`` coordinates, scale by ``sqrt(n/k)``.

    All points see the same step sequence, drawn from ``substream(seed, 0)``
    -- the same one :func:`kacwalk.walks.run_walk` uses for trial 0 -- so the
    result equals ``stiefel_project(X(t).T, k) @ s * sqrt(n/k)`` for the
    walk state ``X(t)`` started at the identity.
    """
    n = cloud.dim
    _check_k(k, n)
    if n < 2:
        raise ValueError("points need dimension >= 2")
    if t < 0:
        raise ValueError("t must be nonnegative")
    v = np.array(cloud.points.T)  # row c holds coordinate c of every point
    done = 0
    for i, j, theta in StepStream(n, "kac", substream(seed, 0)).blocks():
        if done >= t:
            break
        m = min(BLOCK, t - done)
        cos, sin = np.cos(theta[:m]), np.sin(theta[:m])
        for a, b, c, s in zip(i[:m].tolist(), j[:m].tolist(), cos.tolist(), sin.tolist()):
            va = v[a].copy()
            v[a] = c * va - s * v[b]
            v[b] = s * va + c * v[b]
        done += m
    return PointCloud(v[:k].T * math.sqrt(n / k), cloud.labels)


def haar_jl_baseline(cloud: PointCloud, k: int, seed: int = 0) -> PointCloud:
    """Exact Haar rotation from ``substream(seed, 1)``, then the same projection and scaling."""
    n = cloud.dim
    _check_k(k, n)
    x = haar_sample(n, REAL, substream(seed, 1))
    return PointCloud((x[:k] @ cloud.points.T).T * math.sqrt(n / k), cloud.labels)


def stiefel_project(x: np.ndarray, k: int) -> np.ndarray:
    """First ``k`` rows of ``x^T``: a ``k x n`` matrix with orthonormal rows."""
    x = check_group_element(x)
    if np.iscomplexobj(x):
        raise ValueError("stiefel_project expects a real rotation")
    _check_k(k, x.shape[0])
    return np.ascontiguousarray(x.T[:k])


def distortion_report(original: PointCloud, reduced: PointCloud, k: int | None = None, t: int | None = None, seed: int | None = None) -> DistortionReport:
    """Extreme ratios ``|f(s) - f(s')| / |s - s'|`` over all pairs of points."""
    if len(original) != len(reduced):
        raise ValueError("point counts differ")
    if len(original) < 2:
        raise ValueError("need at least two points")
    if original.labels != reduced.labels:
        raise ValueError("labels differ between original and reduced clouds")
    before = pdist(original.points)
    if np.any(before == 0):
        raise ValueError("original cloud has duplicate points")
    ratio = pdist(reduced.points) / before
    return DistortionReport(float(ratio.min()), float(ratio.max()), k, t, seed)
