"""Kac's walk and its variants: step samplers, step application, Haar references.

Three kernels are supported:

``kac``
    pick a coordinate plane uniformly, rotate it by a uniform angle.
``density``
    same plane choice, angle drawn from an :class:`AngleDensity`.
``unitary``
    pick a plane uniformly and act on it by a Haar-random 2x2 unitary.

Randomness always comes from :func:`substream`, so a ``(seed, key...)`` tuple
fully determines every draw regardless of how work is scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate

from .geometry import (
    COMPLEX,
    REAL,
    GroupError,
    check_group_element,
    field_of,
    orthogonality_defect,
    reorthonormalize,
)

TWO_PI = 2.0 * np.pi
KINDS = ("kac", "density", "unitary")
# Steps are drawn in blocks of this size; fixed so that streams never depend
# on how many steps a caller asks for at once.
BLOCK = 1024


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``, e.g. ``(seed, trial)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@lru_cache(maxsize=None)
def plane_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All ``(i, j)`` with ``i < j``, in lexicographic order."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    i, j = np.triu_indices(n, k=1)
    i.flags.writeable = False
    j.flags.writeable = False
    return i, j


def sample_pairs(n: int, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``size`` planes drawn uniformly from the ``n choose 2`` possibilities."""
    pi, pj = plane_pairs(n)
    idx = np.minimum((rng.random(size) * len(pi)).astype(np.intp), len(pi) - 1)
    return pi[idx], pj[idx]


@dataclass(frozen=True)
class PlanarStep:
    """One step of a walk: the plane ``(i, j)`` and either an angle or a 2x2 unitary."""

    i: int
    j: int
    theta: float | None = None
    u: np.ndarray | None = None

    def __post_init__(self):
        if not (0 <= self.i < self.j):
            raise ValueError(f"need 0 <= i < j, got ({self.i}, {self.j})")
        if (self.theta is None) == (self.u is None):
            raise ValueError("a step carries exactly one of theta or u")
        if self.theta is not None:
            object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        else:
            u = np.asarray(self.u, dtype=np.complex128)
            if u.shape != (2, 2) or np.max(np.abs(u @ u.conj().T - np.eye(2))) > 1e-12:
                raise ValueError("u must be a 2x2 unitary")
            object.__setattr__(self, "u", u)

    @property
    def field(self) -> str:
        return REAL if self.theta is not None else COMPLEX

    def block(self) -> np.ndarray:
        """The 2x2 matrix acting on rows ``(i, j)``."""
        if self.theta is not None:
            c, s = math.cos(self.theta), math.sin(self.theta)
            return np.array([[c, -s], [s, c]])
        return self.u


@dataclass(frozen=True)
class AngleDensity:
    """A density on [0, 2pi] with known positive lower and finite upper bounds."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    rho_min: float
    rho_max: float
    name: str = "custom"

    def __post_init__(self):
        if not self.rho_min > 0:
            raise ValueError(f"rho_min must be positive, got {self.rho_min}")
        if not np.isfinite(self.rho_max) or self.rho_max < self.rho_min:
            raise ValueError(f"bad rho_max {self.rho_max}")
        if TWO_PI * self.rho_min > 1 + 1e-12:
            raise ValueError("2*pi*rho_min cannot exceed 1 for a density")
        grid = np.linspace(0.0, TWO_PI, 4097)
        vals = np.asarray(self.evaluate(grid), dtype=float)
        if np.any(vals < self.rho_min - 1e-12) or np.any(vals > self.rho_max + 1e-12):
            raise ValueError("density leaves [rho_min, rho_max] on the check grid")
        total, _ = integrate.quad(lambda t: float(self.evaluate(np.array([t]))[0]), 0.0, TWO_PI, limit=200)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density integrates to {total:.9f}, not 1")

    @property
    def uniform_weight(self) -> float:
        """Mixture weight ``2 pi rho_min`` of the uniform component."""
        return min(1.0, TWO_PI * self.rho_min)

    def residual(self, theta):
        """Residual density ``(rho - rho_min) / (1 - 2 pi rho_min)``."""
        return (self.evaluate(theta) - self.rho_min) / (1.0 - self.uniform_weight)

    @classmethod
    def uniform(cls) -> "AngleDensity":
        c = 1.0 / TWO_PI
        return cls(lambda t: np.full(np.shape(t), c), c, c, name="uniform")

    @classmethod
    def cosine(cls, uniform_weight: float) -> "AngleDensity":
        """``(1 + a cos theta) / 2pi`` with ``a = 1 - uniform_weight``."""
        a = 1.0 - uniform_weight
        if not 0.0 <= a < 1.0:
            raise ValueError("uniform_weight must lie in (0, 1]")
        return cls(
            lambda t: (1.0 + a * np.cos(t)) / TWO_PI,
            (1.0 - a) / TWO_PI,
            (1.0 + a) / TWO_PI,
            name=f"cosine({uniform_weight:g})",
        )

    @classmethod
    def triangular(cls, uniform_weight: float = 0.5) -> "AngleDensity":
        """Uniform floor plus a tent peaking at pi."""
        w = uniform_weight
        if not 0.0 < w <= 1.0:
            raise ValueError("uniform_weight must lie in (0, 1]")
        floor = w / TWO_PI
        peak = (1.0 - w) / np.pi  # tent of height `peak` has mass (1 - w)
        return cls(
            lambda t: floor + peak * (1.0 - np.abs(np.asarray(t) - np.pi) / np.pi),
            floor,
            floor + peak,
            name=f"triangular({w:g})",
        )


def rejection_sample(evaluate, bound: float, size: int, rng: np.random.Generator):
    """Draw ``size`` angles from ``evaluate`` under the flat envelope ``bound``.

    Returns ``(angles, accepted, proposed)``; ``accepted / proposed`` estimates
    the acceptance rate ``1 / (2 pi bound)`` for a normalised density.
    """
    out = np.empty(size)
    filled = accepted = proposed = 0
    while filled < size:
        m = max(64, int(1.2 * (size - filled) * bound * TWO_PI) + 16)
        theta = rng.random(m) * TWO_PI
        vals = np.asarray(evaluate(theta), dtype=float)
        if np.any(vals > bound * (1 + 1e-9)):
            raise ValueError("rejection envelope violated: density exceeds its bound")
        keep = theta[rng.random(m) * bound < vals]
        take = min(len(keep), size - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
        accepted += len(keep)
        proposed += m
    return out, accepted, proposed


def sample_density_angles(density: AngleDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """Angles with density ``density`` by rejection against ``rho_max``."""
    return rejection_sample(density.evaluate, density.rho_max, size, rng)[0]


def sample_residual_angles(density: AngleDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """Angles from the residual density left after removing the uniform part."""
    if density.uniform_weight >= 1.0:
        return rng.random(size) * TWO_PI
    bound = (density.rho_max - density.rho_min) / (1.0 - density.uniform_weight)
    return rejection_sample(density.residual, bound, size, rng)[0]


def haar_u2(size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` Haar-random 2x2 unitaries (complex Ginibre + QR phase fix)."""
    z = (rng.standard_normal((size, 2, 2)) + 1j * rng.standard_normal((size, 2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def sample_kac_step(n: int, rng: np.random.Generator) -> PlanarStep:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    i, j = sample_pairs(n, 1, rng)
    return PlanarStep(int(i[0]), int(j[0]), theta=rng.random() * TWO_PI)


def sample_density_step(n: int, density: AngleDensity, rng: np.random.Generator) -> PlanarStep:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    i, j = sample_pairs(n, 1, rng)
    return PlanarStep(int(i[0]), int(j[0]), theta=sample_density_angles(density, 1, rng)[0])


def sample_unitary_step(n: int, rng: np.random.Generator) -> PlanarStep:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    i, j = sample_pairs(n, 1, rng)
    return PlanarStep(int(i[0]), int(j[0]), u=haar_u2(1, rng)[0])


def apply_step(x: np.ndarray, step: PlanarStep) -> np.ndarray:
    """``R x`` for the step's rotation ``R``; only rows i and j are touched."""
    x = np.asarray(x)
    if field_of(x) != step.field:
        raise ValueError(f"field mismatch: {step.field} step on a {field_of(x)} state")
    if step.j >= x.shape[0]:
        raise IndexError(f"plane ({step.i}, {step.j}) out of range for n={x.shape[0]}")
    out = x.copy()
    rows = [step.i, step.j]
    out[rows] = step.block() @ x[rows]
    return out


def apply_step_to_vector(v: np.ndarray, step: PlanarStep) -> np.ndarray:
    """Velocity update for one collision; only coordinates i and j change."""
    v = np.asarray(v, dtype=float)
    if step.theta is None:
        raise ValueError("vector action needs a real (angle) step")
    if v.ndim != 1 or step.j >= v.shape[0]:
        raise ValueError(f"vector of length {v.shape} incompatible with plane ({step.i}, {step.j})")
    out = v.copy()
    c, s = math.cos(step.theta), math.sin(step.theta)
    vi, vj = v[step.i], v[step.j]
    out[step.i] = c * vi - s * vj
    out[step.j] = s * vi + c * vj
    return out


def haar_sample(n: int, field: str = REAL, rng: np.random.Generator | None = None, size: int | None = None):
    """Haar-distributed element(s) of SO(n) or U(n).

    Gaussian (Ginibre) matrix, QR, then the diagonal of R is made positive.
    For SO(n) the first column is negated when the determinant is -1.
    With ``size`` given, returns a stack of shape ``(size, n, n)``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    rng = np.random.default_rng() if rng is None else rng
    shape = (1 if size is None else size, n, n)
    if field == COMPLEX:
        z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    elif field == REAL:
        z = rng.standard_normal(shape)
    else:
        raise ValueError(f"unknown field {field!r}")
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    if field == REAL:
        neg = np.linalg.det(q) < 0
        q[neg, :, 0] *= -1
    return q[0] if size is None else q


class StepStream:
    """Deterministic sequence of steps for one kernel.

    Steps are drawn in fixed blocks, so the t-th step depends only on the
    generator's seed material and t.
    """

    def __init__(self, n: int, kind: str, rng: np.random.Generator, density: AngleDensity | None = None):
        if n < 2:
            raise ValueError(f"need n >= 2, got {n}")
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
        if kind == "density" and density is None:
            raise ValueError("kind 'density' needs an AngleDensity")
        self.n, self.kind, self.rng, self.density = n, kind, rng, density

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Yield ``(i, j, payload)`` arrays of length BLOCK.

        ``payload`` holds angles for real kernels and 2x2 unitaries otherwise.
        """
        while True:
            i, j = sample_pairs(self.n, BLOCK, self.rng)
            if self.kind == "kac":
                payload = self.rng.random(BLOCK) * TWO_PI
            elif self.kind == "density":
                payload = sample_density_angles(self.density, BLOCK, self.rng)
            else:
                payload = haar_u2(BLOCK, self.rng)
            yield i, j, payload

    def steps(self, count: int) -> Iterator[PlanarStep]:
        produced = 0
        for i, j, payload in self.blocks():
            for k in range(BLOCK):
                if produced == count:
                    return
                if self.kind == "unitary":
                    yield PlanarStep(int(i[k]), int(j[k]), u=payload[k])
                else:
                    yield PlanarStep(int(i[k]), int(j[k]), theta=float(payload[k]))
                produced += 1

    def arrays(self, count: int):
        """First ``count`` steps as arrays ``(i, j, payload)``."""
        parts = []
        got = 0
        for block in self.blocks():
            if got >= count:
                break
            parts.append(block)
            got += BLOCK
        if not parts:
            empty = np.empty(0, dtype=np.intp)
            payload = np.empty((0, 2, 2), complex) if self.kind == "unitary" else np.empty(0)
            return empty, empty, payload
        return tuple(np.concatenate([p[k] for p in parts])[:count] for k in range(3))


@dataclass
class WalkConfig:
    """Everything needed to reproduce a walk."""

    n: int
    kind: str = "kac"
    seed: int = 0
    density: AngleDensity | None = None
    reorthonormalize_period: int = 10_000

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "density" and self.density is None:
            raise ValueError("kind 'density' needs a density")
        if self.reorthonormalize_period < 0:
            raise ValueError("reorthonormalize_period must be >= 0 (0 disables repair)")

    @property
    def field(self) -> str:
        return COMPLEX if self.kind == "unitary" else REAL

    def stream(self, *key: int) -> StepStream:
        return StepStream(self.n, self.kind, substream(self.seed, *key), self.density)


@dataclass
class Trajectory:
    config: WalkConfig
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    steps: int = 0
    summary: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1][1]


def _rotate_rows(x: np.ndarray, i: int, j: int, block) -> None:
    xi = x[i].copy()
    xj = x[j]
    (b00, b01), (b10, b11) = block
    x[i] = b00 * xi + b01 * xj
    x[j] = b10 * xi + b11 * xj


def run_walk(
    x0: np.ndarray,
    steps: int,
    config: WalkConfig,
    snapshot_times: Sequence[int] | None = None,
    trial: int = 0,
) -> Trajectory:
    """Run ``steps`` steps of the configured kernel from ``x0``.

    Snapshots are taken at ``snapshot_times`` (default: start and end). The
    step sequence comes from ``substream(config.seed, trial)``.
    """
    x0 = check_group_element(x0)
    if x0.shape[0] != config.n or field_of(x0) != config.field:
        raise ValueError(f"x0 ({field_of(x0)}, n={x0.shape[0]}) does not match config ({config.field}, n={config.n})")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    times = sorted(set([0, steps] if snapshot_times is None else [0, *snapshot_times]))
    if times[-1] > steps or times[0] < 0:
        raise ValueError("snapshot times must lie in [0, steps]")
    wanted = set(times)
    x = x0.copy()
    traj = Trajectory(config=config, steps=steps)
    traj.snapshots.append((0, x.copy()))
    period = config.reorthonormalize_period
    repairs = 0
    t = 0
    for i, j, payload in config.stream(trial).blocks():
        if t >= steps:
            break
        for k in range(min(BLOCK, steps - t)):
            if config.kind == "unitary":
                block = payload[k]
            else:
                c, s = math.cos(payload[k]), math.sin(payload[k])
                block = ((c, -s), (s, c))
            _rotate_rows(x, int(i[k]), int(j[k]), block)
            t += 1
            if period and t % period == 0:
                x = reorthonormalize(x)
                repairs += 1
            if t in wanted:
                traj.snapshots.append((t, x.copy()))
    traj.summary = {"orthogonality_defect": orthogonality_defect(x), "repairs": repairs}
    return traj


def rotate_row_pairs(a: np.ndarray, i, j, b00, b01, b10, b11) -> None:
    """In place, for every ``k``: rows ``(i[k], j[k])`` of ``a[k]`` <- 2x2 block times those rows."""
    ar = np.arange(a.shape[0])
    ri = a[ar, i].copy()
    rj = a[ar, j].copy()
    a[ar, i] = b00[:, None] * ri + b01[:, None] * rj
    a[ar, j] = b10[:, None] * ri + b11[:, None] * rj


def advance_batch(
    x: np.ndarray,
    steps: int,
    kind: str,
    rng: np.random.Generator,
    density: AngleDensity | None = None,
) -> np.ndarray:
    """Advance every walk in the stack ``x`` (shape ``(B, n, n)``) by ``steps`` independent steps.

    Modifies ``x`` in place and returns it. Each walk gets its own draws; the
    whole batch consumes ``rng`` in a fixed order, so the result is a pure
    function of the generator state.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if kind == "density" and density is None:
        raise ValueError("kind 'density' needs an AngleDensity")
    b, n = x.shape[0], x.shape[1]
    for _ in range(steps):
        i, j = sample_pairs(n, b, rng)
        if kind == "unitary":
            u = haar_u2(b, rng)
            rotate_row_pairs(x, i, j, u[:, 0, 0], u[:, 0, 1], u[:, 1, 0], u[:, 1, 1])
            continue
        theta = rng.random(b) * TWO_PI if kind == "kac" else sample_density_angles(density, b, rng)
        c, s = np.cos(theta), np.sin(theta)
        rotate_row_pairs(x, i, j, c, -s, s, c)
    return x


def run_vector(v0: np.ndarray, steps: int, seed: int, trial: int = 0) -> np.ndarray:
    """Kac's velocity process: ``steps`` uniform-angle collisions applied to ``v0``."""
    v = np.array(v0, dtype=float)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError("v0 must be a vector of length >= 2")
    stream = StepStream(v.shape[0], "kac", substream(seed, trial))
    t = 0
    for i, j, theta in stream.blocks():
        if t >= steps:
            break
        m = min(BLOCK, steps - t)
        c, s = np.cos(theta[:m]), np.sin(theta[:m])
        for k in range(m):
            a, b = i[k], j[k]
            vi, vj = v[a], v[b]
            v[a] = c[k] * vi - s[k] * vj
            v[b] = s[k] * vi + c[k] * vj
        t += m
    return v


__all__ = [
    "AngleDensity",
    "GroupError",
    "PlanarStep",
    "StepStream",
    "Trajectory",
    "WalkConfig",
    "advance_batch",
    "apply_step",
    "apply_step_to_vector",
    "haar_sample",
    "haar_u2",
    "rotate_row_pairs",
    "plane_pairs",
    "rejection_sample",
    "run_vector",
    "run_walk",
    "sample_density_angles",
    "sample_density_step",
    "sample_kac_step",
    "sample_pairs",
    "sample_residual_angles",
    "sample_unitary_step",
    "substream",
]
