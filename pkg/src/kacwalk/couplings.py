"""Contracting one-step couplings for the three kernels.

Each coupling moves two states ``(x, y)`` by one step of the same kernel so
that each coordinate, taken alone, is an honest step of the walk, while the
pair is pulled together:

* Kac kernel: same plane, angles ``theta`` and ``theta - alpha`` where
  ``alpha`` is the ``(j, i)`` entry of ``h = skew(y x^T - id)``.
* Angle-density kernel: split the density as ``w * uniform + (1 - w) *
  residual``; the uniform part is coupled as above, the residual part uses
  the same angle on both sides.
* Unitary kernel: same plane and Haar ``R`` for ``x``; ``R v`` for ``y`` with
  ``v = exp(-h_ij)``, ``h_ij`` the 2x2 block of ``h = antiherm(y x^* - id)``.

The ``*_batch`` functions act on stacks of shape ``(B, n, n)`` and are what
the experiment harness uses; the single-pair functions wrap them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    COMPLEX,
    REAL,
    check_group_element,
    field_of,
    geodesic_distance,
    reorthonormalize,
    unitary_exp_2x2,
)
from .walks import (
    TWO_PI,
    AngleDensity,
    haar_u2,
    rotate_row_pairs as _rotate_pairs,
    sample_pairs,
    sample_residual_angles,
    substream,
)

UNIFORM = "uniform"
RESIDUAL = "residual"


def _rows(a: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return a[np.arange(a.shape[0]), idx]


def coupling_angles(x: np.ndarray, y: np.ndarray, i, j) -> np.ndarray:
    """Entry ``(j, i)`` of ``skew(y x^T - id)`` for each stacked pair."""
    xi, xj = _rows(x, i), _rows(x, j)
    yi, yj = _rows(y, i), _rows(y, j)
    return 0.5 * (np.einsum("bk,bk->b", yj, xi) - np.einsum("bk,bk->b", yi, xj))


def coupling_angle(x, y, i: int, j: int) -> float:
    """Shift ``alpha`` for the Kac coupling in plane ``(i, j)``.

    ``alpha = <h, a_ij>_hs / sqrt(2) = h[j, i]`` with ``h = skew(y x^T - id)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if i >= j:
        raise ValueError(f"need i < j, got ({i}, {j})")
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    return float(coupling_angles(x[None], y[None], np.array([i]), np.array([j]))[0])


def _angle_rotate(a, i, j, theta) -> None:
    c, s = np.cos(theta), np.sin(theta)
    _rotate_pairs(a, i, j, c, -s, s, c)


def coupled_kac_batch(x: np.ndarray, y: np.ndarray, rng: np.random.Generator):
    """One coupled Kac step for every pair in the stacks (modified in place).

    Returns a dict of per-pair draws: ``i, j, theta, theta_prime, alpha``.
    """
    b, n = x.shape[0], x.shape[1]
    i, j = sample_pairs(n, b, rng)
    theta = rng.random(b) * TWO_PI
    alpha = coupling_angles(x, y, i, j)
    alpha[np.all(x == y, axis=(1, 2))] = 0.0
    theta_p = np.mod(theta - alpha, TWO_PI)
    _angle_rotate(x, i, j, theta)
    _angle_rotate(y, i, j, theta_p)
    return {"i": i, "j": j, "theta": theta, "theta_prime": theta_p, "alpha": alpha}


def coupled_density_batch(x: np.ndarray, y: np.ndarray, density: AngleDensity, rng: np.random.Generator):
    """One coupled step of the angle-density kernel (in place).

    With probability ``2 pi rho_min`` the uniform branch (shifted angles);
    otherwise the residual branch with identical angles.
    """
    b, n = x.shape[0], x.shape[1]
    i, j = sample_pairs(n, b, rng)
    uniform = rng.random(b) < density.uniform_weight
    theta = rng.random(b) * TWO_PI
    n_res = int(np.count_nonzero(~uniform))
    if n_res:
        theta[~uniform] = sample_residual_angles(density, n_res, rng)
    alpha = coupling_angles(x, y, i, j)
    alpha[np.all(x == y, axis=(1, 2))] = 0.0
    theta_p = np.where(uniform, np.mod(theta - alpha, TWO_PI), theta)
    _angle_rotate(x, i, j, theta)
    _angle_rotate(y, i, j, theta_p)
    return {
        "i": i,
        "j": j,
        "theta": theta,
        "theta_prime": theta_p,
        "alpha": np.where(uniform, alpha, 0.0),
        "branch": np.where(uniform, UNIFORM, RESIDUAL),
    }


def tangent_blocks(x: np.ndarray, y: np.ndarray, i, j) -> np.ndarray:
    """2x2 blocks on rows/cols ``(i, j)`` of ``antiherm(y x^* - id)``."""
    xi, xj = _rows(x, i), _rows(x, j)
    yi, yj = _rows(y, i), _rows(y, j)
    m = np.empty((x.shape[0], 2, 2), dtype=np.complex128)
    # m[a, b] = <row a of y, row b of x> = (y x^*)[a, b]
    for p, yr in enumerate((yi, yj)):
        for q, xr in enumerate((xi, xj)):
            m[:, p, q] = np.einsum("bk,bk->b", yr, xr.conj())
    return 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))


def coupled_unitary_batch(x: np.ndarray, y: np.ndarray, rng: np.random.Generator):
    """One coupled step of the unitary kernel (in place).

    ``x`` moves by Haar ``R``, ``y`` by ``R v`` with ``v = exp(-h_ij)``; since
    ``v`` depends only on ``(i, j, x, y)``, ``R v`` is again Haar.
    """
    b, n = x.shape[0], x.shape[1]
    i, j = sample_pairs(n, b, rng)
    r = haar_u2(b, rng)
    hb = tangent_blocks(x, y, i, j)
    hb[np.all(x == y, axis=(1, 2))] = 0.0
    v = unitary_exp_2x2(-hb)
    rp = r @ v
    _rotate_pairs(x, i, j, r[:, 0, 0], r[:, 0, 1], r[:, 1, 0], r[:, 1, 1])
    _rotate_pairs(y, i, j, rp[:, 0, 0], rp[:, 0, 1], rp[:, 1, 0], rp[:, 1, 1])
    return {"i": i, "j": j, "u": r, "u_prime": rp, "v": v, "h_block": hb}


def tangent_contraction_prediction(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Predicted ``E[D(X, Y)^2]`` after one coupled unitary step, to second order.

    ``|h|^2 - (2/n) sum_k |h_kk|^2 - (1/C(n,2)) sum_{k<l} 2 |h_kl|^2`` with
    ``h = antiherm(y x^* - id)``.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    n = x.shape[-1]
    m = y @ np.conj(np.swapaxes(x, -1, -2))
    h = 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))
    total = np.sum(np.abs(h) ** 2, axis=(-2, -1))
    diag = np.sum(np.abs(np.diagonal(h, axis1=-2, axis2=-1)) ** 2, axis=-1)
    off = total - diag  # = 2 sum_{k<l} |h_kl|^2
    return total - (2.0 / n) * diag - off / (n * (n - 1) / 2)


@dataclass
class CoupledState:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = check_group_element(self.x)
        self.y = check_group_element(self.y)
        if self.x.shape != self.y.shape or field_of(self.x) != field_of(self.y):
            raise ValueError("x and y must share dimension and field")

    @property
    def distance(self) -> float:
        return float(geodesic_distance(self.x, self.y))


@dataclass(frozen=True)
class CoupledStepRecord:
    i: int
    j: int
    theta: float | None
    theta_prime: float | None
    alpha: float | None
    branch: str
    d_before: float
    d_after: float
    u: np.ndarray | None = None
    v: np.ndarray | None = None


def _step(state: CoupledState, rng, kind: str, density: AngleDensity | None):
    x = state.x[None].copy()
    y = state.y[None].copy()
    d_before = state.distance
    if kind == "kac":
        info = coupled_kac_batch(x, y, rng)
    elif kind == "density":
        info = coupled_density_batch(x, y, density, rng)
    else:
        info = coupled_unitary_batch(x, y, rng)
    new = CoupledState(x[0], y[0])
    d_after = float(geodesic_distance(x[0], y[0]))
    if kind == "unitary":
        rec = CoupledStepRecord(
            int(info["i"][0]), int(info["j"][0]), None, None, None, UNIFORM, d_before, d_after,
            u=info["u"][0], v=info["v"][0],
        )
    else:
        rec = CoupledStepRecord(
            int(info["i"][0]),
            int(info["j"][0]),
            float(info["theta"][0]),
            float(info["theta_prime"][0]),
            float(info["alpha"][0]),
            str(info["branch"][0]) if "branch" in info else UNIFORM,
            d_before,
            d_after,
        )
    return new, rec


def coupled_kac_step(state: CoupledState, rng: np.random.Generator):
    if field_of(state.x) != REAL:
        raise ValueError("Kac coupling needs real orthogonal states")
    return _step(state, rng, "kac", None)


def coupled_density_step(state: CoupledState, density: AngleDensity, rng: np.random.Generator):
    if field_of(state.x) != REAL:
        raise ValueError("density coupling needs real orthogonal states")
    if not density.rho_min > 0:
        raise ValueError("density coupling needs rho_min > 0")
    return _step(state, rng, "density", density)


def coupled_unitary_step(state: CoupledState, rng: np.random.Generator):
    if field_of(state.x) != COMPLEX:
        raise ValueError("unitary coupling needs complex unitary states")
    return _step(state, rng, "unitary", None)


TRACE_COLUMNS = ("t", "i", "j", "theta", "theta_prime", "alpha", "branch", "D_after")


@dataclass
class CoupledTrace:
    """Per-step record of one coupled run."""

    kind: str
    seed: int
    initial_distance: float
    records: list[CoupledStepRecord] = field(default_factory=list)

    @property
    def distances(self) -> np.ndarray:
        """``D(X_t, Y_t)`` for ``t = 0 .. steps``."""
        return np.array([self.initial_distance] + [r.d_after for r in self.records])

    def rows(self):
        for t, r in enumerate(self.records, start=1):
            yield (t, r.i, r.j, r.theta, r.theta_prime, r.alpha, r.branch, r.d_after)


def run_coupled_walk(
    x0,
    y0,
    steps: int,
    kind: str = "kac",
    seed: int = 0,
    density: AngleDensity | None = None,
    trial: int = 0,
    reorthonormalize_period: int = 10_000,
) -> CoupledTrace:
    """Run a coupled chain for ``steps`` steps from ``(x0, y0)``; deterministic in ``seed``."""
    state = CoupledState(np.asarray(x0), np.asarray(y0))
    if kind not in ("kac", "density", "unitary"):
        raise ValueError(f"unknown kind {kind!r}")
    if (kind == "unitary") != (field_of(state.x) == COMPLEX):
        raise ValueError(f"kind {kind!r} does not match the field of the states")
    if kind == "density" and density is None:
        raise ValueError("kind 'density' needs a density")
    rng = substream(seed, trial)
    trace = CoupledTrace(kind=kind, seed=seed, initial_distance=state.distance)
    for t in range(1, steps + 1):
        state, rec = _step(state, rng, kind, density)
        if reorthonormalize_period and t % reorthonormalize_period == 0:
            same = np.array_equal(state.x, state.y)
            x = reorthonormalize(state.x)
            state = CoupledState(x, x.copy() if same else reorthonormalize(state.y))
        trace.records.append(rec)
    return trace
