"""Numerical experiments for the contraction and mixing results.

Every experiment takes an integer ``seed`` and derives all of its randomness
from :func:`kacwalk.walks.substream` keyed by (seed, role, block index), so a
report is a pure function of its arguments. Work is split into fixed-size
blocks; ``threads`` only changes how blocks are scheduled, never the result.

Report types carry plain floats/ints and provide ``to_dict()`` for JSON
output.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .couplings import (
    coupled_density_batch,
    coupled_kac_batch,
    coupled_unitary_batch,
    tangent_contraction_prediction,
)
from .geometry import (
    COMPLEX,
    REAL,
    block_rotation,
    geodesic_distance,
    hs_norm,
    tangent_project,
)
from .transport import EmpiricalMeasure, empirical_wasserstein
from .walks import KINDS, AngleDensity, advance_batch, haar_sample, substream

CHUNK = 4096
MAX_PROBE_RADIUS = 0.05
MAX_DECAY_DISTANCE = 0.1
MAX_MIX_SAMPLES = 500
EPS = np.finfo(float).eps


class DegenerateWindowError(ValueError):
    """The decay curve has too few resolved points to fit a slope."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not settle; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: float):
        super().__init__(message)
        self.last = last


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _chunks(total: int, size: int = CHUNK):
    return [(b, min(size, total - b * size)) for b in range((total + size - 1) // size)]


def field_for(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    return COMPLEX if kind == "unitary" else REAL


def contraction_coefficient(n: int, kind: str, density: AngleDensity | None = None) -> float:
    """Per-step factor on ``E[D^2]`` for nearby states: ``1 - w / C(n, 2)``.

    ``w`` is 1 for the uniform Kac and unitary kernels and ``2 pi rho_min``
    for an angle density (for the unitary kernel this is an upper bound).
    """
    pairs = n * (n - 1) / 2
    w = density.uniform_weight if kind == "density" else 1.0
    return 1.0 - w / pairs


def mixing_time_bound(n: int, eps: float) -> int:
    """``ceil(n^2 ln(pi sqrt(n) / eps))`` steps."""
    return math.ceil(n * n * math.log(math.pi * math.sqrt(n) / eps))


def random_tangent(n: int, field: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-norm (Hilbert-Schmidt) skew / anti-Hermitian directions, Gaussian-distributed in direction."""
    g = rng.standard_normal((size, n, n))
    if field == COMPLEX:
        g = g + 1j * rng.standard_normal((size, n, n))
    h = tangent_project(g)
    return h / hs_norm(h)[:, None, None]


def exp_tangent(h: np.ndarray) -> np.ndarray:
    """``exp(h)`` for a stack of skew / anti-Hermitian matrices via a Hermitian eigendecomposition."""
    w, v = np.linalg.eigh(1j * h)  # 1j*h is Hermitian; exp(h) = V exp(-i w) V^*
    out = (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return out.real.copy() if not np.iscomplexobj(h) else out


def pairs_at_distance(n: int, field: str, r: float, size: int, rng: np.random.Generator):
    """``size`` pairs ``(x, y)`` with ``x`` Haar and ``y = exp(r h) x`` for a random unit tangent ``h``.

    For ``r < pi`` the geodesic distance of each pair is exactly ``r`` (up to rounding).
    """
    x = haar_sample(n, field, rng, size)
    h = random_tangent(n, field, size, rng)
    y = exp_tangent(r * h) @ x
    return x, y


def worst_case_start(n: int, field: str = REAL, gap: float = 1e-6) -> np.ndarray:
    """Block rotation by ``pi - gap`` in each of the planes (0,1), (2,3), ...

    For even n its distance to the identity is ``sqrt(n) (pi - gap)``.
    """
    x = block_rotation(np.full(n // 2, np.pi - gap), n)
    return x.astype(np.complex128) if field == COMPLEX else x


def _coupled_step(x, y, kind, rng, density):
    if kind == "kac":
        return coupled_kac_batch(x, y, rng)
    if kind == "density":
        if density is None:
            raise ValueError("kind 'density' needs an AngleDensity")
        return coupled_density_batch(x, y, density, rng)
    return coupled_unitary_batch(x, y, rng)


# ---------------------------------------------------------------- contraction


@dataclass(frozen=True)
class ContractionReport:
    n: int
    kind: str
    r: float
    pairs: int
    trials_per_pair: int
    trials: int
    mean_ratio: float
    stderr: float
    predicted: float
    seed: int
    second_order_prediction: float | None = None
    second_order_stderr: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def tolerance(self, k: float = 3.0) -> float:
        """``k * stderr + 10 r``: Monte Carlo error plus the third-order slack."""
        return k * self.stderr + 10.0 * self.r


def local_contraction_probe(
    n: int,
    kind: str = "kac",
    r: float = 1e-3,
    pairs: int = 100_000,
    trials_per_pair: int = 1,
    seed: int = 0,
    density: AngleDensity | None = None,
    threads: int = 1,
) -> ContractionReport:
    """Mean of ``D(X, Y)^2 / r^2`` after one coupled step from pairs at distance ``r``.

    Each of ``pairs`` random pairs (``x`` Haar, ``y`` at geodesic distance
    ``r`` in a random tangent direction) is stepped ``trials_per_pair``
    times independently. The standard error is computed from per-pair means.
    For the unitary kernel the report also carries the exact second-order
    prediction averaged over the sampled pairs.
    """
    if not 0 < r <= MAX_PROBE_RADIUS:
        raise ValueError(f"r must lie in (0, {MAX_PROBE_RADIUS}] for the small-distance regime, got {r}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if pairs < 1 or trials_per_pair < 1:
        raise ValueError("pairs and trials_per_pair must be positive")
    fld = field_for(kind)
    if kind == "density" and density is None:
        raise ValueError("kind 'density' needs an AngleDensity")

    def run(block):
        b, size = block
        rng = substream(seed, 0, b)
        x, y = pairs_at_distance(n, fld, r, size, rng)
        pred = tangent_contraction_prediction(x, y) / r**2 if kind == "unitary" else None
        xs = np.repeat(x, trials_per_pair, axis=0)
        ys = np.repeat(y, trials_per_pair, axis=0)
        _coupled_step(xs, ys, kind, rng, density)
        ratio = geodesic_distance(xs, ys) ** 2 / r**2
        return ratio.reshape(size, trials_per_pair), pred

    out = _map(run, _chunks(pairs), threads)
    ratios = np.concatenate([o[0] for o in out])
    per_pair = ratios.mean(axis=1)
    spread_source = per_pair if pairs >= 2 else ratios.ravel()
    m = spread_source.size
    stderr = float(spread_source.std(ddof=1) / math.sqrt(m)) if m >= 2 else float("nan")
    second = second_se = None
    if kind == "unitary":
        pred = np.concatenate([o[1] for o in out])
        second = float(pred.mean())
        second_se = float(pred.std(ddof=1) / math.sqrt(pred.size)) if pred.size >= 2 else float("nan")
    return ContractionReport(
        n=n,
        kind=kind,
        r=float(r),
        pairs=pairs,
        trials_per_pair=trials_per_pair,
        trials=pairs * trials_per_pair,
        mean_ratio=float(per_pair.mean()),
        stderr=stderr,
        predicted=contraction_coefficient(n, kind, density),
        seed=seed,
        second_order_prediction=second,
        second_order_stderr=second_se,
    )


# ---------------------------------------------------------------- decay


@dataclass(frozen=True)
class DecayCurve:
    """Per-time distances of ``trials`` coupled trajectories, ``d2[t, trial] = D(X_t, Y_t)^2``."""

    n: int
    kind: str
    d0: float
    seed: int
    d2: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.d2.shape[0])

    @property
    def mean(self) -> np.ndarray:
        return self.d2.mean(axis=1)

    @property
    def stderr(self) -> np.ndarray:
        k = self.d2.shape[1]
        return self.d2.std(axis=1, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(self.d2.shape[0])


@dataclass(frozen=True)
class DecayReport:
    n: int
    kind: str
    d0: float
    steps: int
    trials: int
    seed: int
    window_end: int
    slope: float
    ci_low: float
    ci_high: float
    predicted: float
    times: np.ndarray = field(repr=False)
    mean_d2: np.ndarray = field(repr=False)
    stderr_d2: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if not isinstance(v, np.ndarray)}
        return d


def simulate_decay(
    n: int,
    kind: str = "kac",
    steps: int = 200,
    trials: int = 10_000,
    seed: int = 0,
    d0: float = 0.05,
    density: AngleDensity | None = None,
    threads: int = 1,
) -> DecayCurve:
    """Run ``trials`` coupled trajectories from pairs at distance ``d0`` for ``steps`` steps."""
    if not 0 <= d0 <= MAX_DECAY_DISTANCE:
        raise ValueError(f"initial distance must lie in [0, {MAX_DECAY_DISTANCE}], got {d0}")
    if steps < 0 or trials < 1:
        raise ValueError("steps must be >= 0 and trials >= 1")
    fld = field_for(kind)
    if kind == "density" and density is None:
        raise ValueError("kind 'density' needs an AngleDensity")

    def run(block):
        b, size = block
        rng = substream(seed, 0, b)
        if d0 == 0:
            x = haar_sample(n, fld, rng, size)
            y = x.copy()
        else:
            x, y = pairs_at_distance(n, fld, d0, size, rng)
        out = np.empty((steps + 1, size))
        out[0] = geodesic_distance(x, y) ** 2
        for t in range(1, steps + 1):
            _coupled_step(x, y, kind, rng, density)
            out[t] = geodesic_distance(x, y) ** 2
        return out

    d2 = np.concatenate(_map(run, _chunks(trials), threads), axis=1)
    return DecayCurve(n=n, kind=kind, d0=float(d0), seed=seed, d2=d2)


def noise_floor(n: int) -> float:
    """Rounding level of a squared distance computed in double precision."""
    return (n * EPS) ** 2


def fit_window(mean: np.ndarray, stderr: np.ndarray, n: int, rel_se_max: float = 0.1, floor_factor: float = 1e3) -> int:
    """Last index of the initial run of times where the mean is resolved.

    A time is resolved when the mean exceeds ``floor_factor`` times the
    rounding floor and its relative standard error is at most
    ``rel_se_max``. ``D_t^2`` is a product of many random factors, so its
    distribution becomes heavy-tailed with ``t`` and the sample mean is
    eventually dominated by rare trajectories; the relative-error cut keeps
    the fit on the part of the curve the sample actually determines.
    """
    floor = floor_factor * noise_floor(n)
    end = -1
    for t in range(mean.shape[0]):
        if not (mean[t] > floor and stderr[t] <= rel_se_max * mean[t]):
            break
        end = t
    return end


def _slope(times: np.ndarray, logm: np.ndarray) -> float:
    tc = times - times.mean()
    return float(np.dot(tc, logm - logm.mean()) / np.dot(tc, tc))


def fit_decay_slope(curve: DecayCurve, rel_se_max: float = 0.1, bootstrap: int = 200, seed: int | None = None):
    """Least-squares slope of ``log E[D_t^2]`` against ``t`` over the resolved window.

    Returns ``(slope, ci_low, ci_high, window_end)``; the 95% interval is a
    percentile bootstrap over trajectories with the window held fixed.
    """
    mean, se = curve.mean, curve.stderr
    end = fit_window(mean, se, curve.n, rel_se_max)
    if end < 2:
        raise DegenerateWindowError(
            f"only {end + 1} resolved time points (need 3); distances are at the noise floor or too noisy"
        )
    times = np.arange(end + 1, dtype=float)
    slope = _slope(times, np.log(mean[: end + 1]))
    rng = substream(curve.seed if seed is None else seed, 1)
    k = curve.d2.shape[1]
    counts = rng.multinomial(k, np.full(k, 1.0 / k), size=bootstrap).T  # (k, bootstrap)
    boot_means = curve.d2[: end + 1] @ counts / k
    boot = np.array([_slope(times, np.log(np.maximum(boot_means[:, b], np.finfo(float).tiny))) for b in range(bootstrap)])
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return slope, float(lo), float(hi), end


def coupled_decay_curve(
    n: int,
    kind: str = "kac",
    steps: int = 200,
    trials: int = 10_000,
    seed: int = 0,
    d0: float = 0.05,
    density: AngleDensity | None = None,
    rel_se_max: float = 0.1,
    threads: int = 1,
) -> DecayReport:
    """Simulate coupled trajectories and fit the per-step log-decay rate of ``E[D^2]``.

    The prediction is ``ln(1 - w / C(n, 2))`` (see :func:`contraction_coefficient`).
    Raises :class:`DegenerateWindowError` when fewer than three leading time
    points are resolved (e.g. ``d0 = 0``).
    """
    curve = simulate_decay(n, kind, steps, trials, seed, d0, density, threads)
    slope, lo, hi, end = fit_decay_slope(curve, rel_se_max)
    return DecayReport(
        n=n,
        kind=kind,
        d0=float(d0),
        steps=steps,
        trials=trials,
        seed=seed,
        window_end=end,
        slope=slope,
        ci_low=lo,
        ci_high=hi,
        predicted=math.log(contraction_coefficient(n, kind, density)),
        times=curve.times,
        mean_d2=curve.mean,
        stderr_d2=curve.stderr,
    )


# ---------------------------------------------------------------- mixing


@dataclass(frozen=True)
class MixingCurve:
    n: int
    kind: str
    times: tuple
    estimates: tuple
    baseline: float
    baseline_spread: float
    baseline_values: tuple
    sample_size: int
    metric: str
    p: float
    seed: int

    def spreads_above(self) -> np.ndarray:
        """``(estimate - baseline) / baseline_spread`` for each time."""
        return (np.asarray(self.estimates) - self.baseline) / self.baseline_spread

    def within(self, k: float = 2.0) -> np.ndarray:
        return np.abs(self.spreads_above()) <= k

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spreads_above"] = self.spreads_above().tolist()
        return d


def haar_baseline(n: int, field: str, size: int, metric: str, p: float, seed: int, replicates: int = 20, threads: int = 1):
    """``replicates`` values of the empirical W between two independent Haar samples of ``size``."""
    if replicates < 2:
        raise ValueError("need at least two baseline replicates to estimate a spread")

    def one(rep):
        a = haar_sample(n, field, substream(seed, 2, rep), size)
        b = haar_sample(n, field, substream(seed, 3, rep), size)
        return empirical_wasserstein(EmpiricalMeasure(a), EmpiricalMeasure(b), metric, p)

    return np.array(_map(one, range(replicates), threads))


def mixing_curve(
    n: int,
    kind: str = "kac",
    times=(0,),
    sample_size: int = 200,
    metric: str = "D",
    p: float = 2.0,
    seed: int = 0,
    replicates: int = 20,
    start: np.ndarray | None = None,
    density: AngleDensity | None = None,
    threads: int = 1,
) -> MixingCurve:
    """Empirical W between ``t``-step walk samples and fresh Haar samples.

    ``sample_size`` independent walks start from ``start`` (default: the
    far block rotation of :func:`worst_case_start`). At each requested time
    the walk sample is compared with an independent Haar sample of the same
    size. The Haar-vs-Haar baseline (mean and standard deviation over
    ``replicates``) shows the level empirical W has even between identical
    measures.
    """
    if not 1 <= sample_size <= MAX_MIX_SAMPLES:
        raise ValueError(f"sample_size must lie in [1, {MAX_MIX_SAMPLES}], got {sample_size}")
    times = sorted(int(t) for t in times)
    if not times or times[0] < 0:
        raise ValueError("times must be a nonempty list of nonnegative integers")
    fld = field_for(kind)
    x0 = worst_case_start(n, fld) if start is None else np.asarray(start)
    if x0.shape != (n, n):
        raise ValueError(f"start has shape {x0.shape}, expected {(n, n)}")
    x = np.repeat(x0[None], sample_size, axis=0).astype(np.complex128 if fld == COMPLEX else float)
    rng = substream(seed, 0)
    snapshots, t = [], 0
    for target in times:
        advance_batch(x, target - t, kind, rng, density)
        t = target
        snapshots.append(x.copy())

    def estimate(k):
        ref = haar_sample(n, fld, substream(seed, 1, k), sample_size)
        return empirical_wasserstein(EmpiricalMeasure(snapshots[k]), EmpiricalMeasure(ref), metric, p)

    est = _map(estimate, range(len(times)), threads)
    base = haar_baseline(n, fld, sample_size, metric, p, seed, replicates, threads)
    return MixingCurve(
        n=n,
        kind=kind,
        times=tuple(times),
        estimates=tuple(float(e) for e in est),
        baseline=float(base.mean()),
        baseline_spread=float(base.std(ddof=1)),
        baseline_values=tuple(float(b) for b in base),
        sample_size=sample_size,
        metric=metric,
        p=float(p),
        seed=seed,
    )


# ---------------------------------------------------------------- diameter / metric comparison


@dataclass(frozen=True)
class DiameterReport:
    n: int
    trials: int
    seed: int
    max_observed: float
    bound: float
    worst_case_distance: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def diameter_probe(n: int, trials: int = 10_000, seed: int = 0, gap: float = 1e-6, threads: int = 1) -> DiameterReport:
    """Largest ``D`` over random Haar pairs in SO(n), against ``pi sqrt(n)``.

    For even ``n`` also reports ``D(id, c)`` for the block rotation with all
    angles ``pi - gap``, which comes within ``sqrt(n) * gap`` of the bound.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")

    def run(block):
        b, size = block
        rng = substream(seed, 0, b)
        a = haar_sample(n, REAL, rng, size)
        c = haar_sample(n, REAL, rng, size)
        return float(np.max(geodesic_distance(a, c)))

    observed = max(_map(run, _chunks(trials), threads)) if trials > 0 else 0.0
    worst = None
    if n % 2 == 0:
        worst = float(geodesic_distance(np.eye(n), worst_case_start(n, REAL, gap)))
    return DiameterReport(n, trials, seed, observed, math.pi * math.sqrt(n), worst)


@dataclass(frozen=True)
class SandwichRow:
    scale: float
    min_gap: float  # min over pairs of D - hs (nonnegative when hs <= D)
    c_hs: float  # max (D - hs) / hs^2
    c_tangent: float  # max |D - |P_T(z - id)|| / hs^2
    c_normal: float  # max |z - id - P_T(z - id)| / hs^2
    c_hs_cubic: float  # max (D - hs) / hs^3
    c_tangent_cubic: float  # max |D - |P_T(z - id)|| / hs^3


@dataclass(frozen=True)
class SandwichReport:
    n: int
    trials: int
    seed: int
    rows: tuple

    @property
    def hs_below_geodesic(self) -> bool:
        return all(row.min_gap >= -1e-12 for row in self.rows)

    def stability(self, column: str) -> float:
        """Largest relative deviation of a fitted constant from its mean over scales."""
        vals = np.array([getattr(row, column) for row in self.rows])
        return float(np.max(np.abs(vals / vals.mean() - 1.0)))

    def to_dict(self) -> dict:
        return {"n": self.n, "trials": self.trials, "seed": self.seed, "rows": [asdict(r) for r in self.rows]}


def metric_sandwich_probe(n: int, trials: int = 2000, scales=(0.05, 0.1, 0.2, 0.5), seed: int = 0) -> SandwichReport:
    """Compare ``hs``, ``D`` and the tangent projection on random pairs at each scale.

    Pairs are ``(x, exp(s h) x)`` with ``x`` Haar and ``h`` a random unit
    tangent, so ``D = s``. For each scale the smallest constants ``c`` with
    ``residual <= c hs^k`` on every sampled pair are reported, for ``k = 2``
    and ``k = 3``.
    """
    if any(not 0 < s <= 0.5 for s in scales):
        raise ValueError("scales must lie in (0, 0.5]")
    rows = []
    for k, s in enumerate(scales):
        rng = substream(seed, 0, k)
        x, y = pairs_at_distance(n, REAL, s, trials, rng)
        d = geodesic_distance(x, y)
        hs = hs_norm(x - y)
        z = y @ np.swapaxes(x, -1, -2)
        m = z - np.eye(n)
        tang = tangent_project(m)
        t_norm = hs_norm(tang)
        r_hs = d - hs
        r_t = np.abs(d - t_norm)
        r_n = hs_norm(m - tang)
        rows.append(
            SandwichRow(
                scale=float(s),
                min_gap=float(r_hs.min()),
                c_hs=float(np.max(r_hs / hs**2)),
                c_tangent=float(np.max(r_t / hs**2)),
                c_normal=float(np.max(r_n / hs**2)),
                c_hs_cubic=float(np.max(r_hs / hs**3)),
                c_tangent_cubic=float(np.max(r_t / hs**3)),
            )
        )
    return SandwichReport(n, trials, seed, tuple(rows))


# ---------------------------------------------------------------- volumes


@dataclass(frozen=True)
class VolumeEstimate:
    params: dict
    hits: int
    samples: int
    estimate: float
    ci_low: float
    ci_high: float
    confidence: float
    seed: int
    bracket: tuple | None = None

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.samples)

    @property
    def packing_bound(self) -> float:
        """``1 / estimate`` (infinite with zero hits)."""
        return math.inf if self.hits == 0 else 1.0 / self.estimate

    @property
    def ln_packing(self) -> float:
        """Conservative ``-ln(ci_high)``: valid at the stated confidence even with zero hits."""
        return -math.log(self.ci_high)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stderr"] = self.stderr
        d["ln_packing"] = self.ln_packing
        return d


def _binomial_ci(hits: int, samples: int, confidence: float):
    """Clopper-Pearson interval."""
    alpha = 1 - confidence
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2, hits, samples - hits + 1))
    hi = 1.0 if hits == samples else float(stats.beta.ppf(1 - alpha / 2, hits + 1, samples - hits))
    return lo, hi


def _ball_distances(n: int, samples: int, seed: int, threads: int) -> np.ndarray:
    def run(block):
        b, size = block
        x = haar_sample(n, REAL, substream(seed, 0, b), size)
        return hs_norm(x - np.eye(n))

    return np.concatenate(_map(run, _chunks(samples), threads))


def ball_volume_curve(n: int, radii, samples: int = 100_000, seed: int = 0, confidence: float = 0.95, threads: int = 1):
    """Haar measure of hs-balls ``B(id, r)`` for several radii from one common sample."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if samples < 1:
        raise ValueError("samples must be positive")
    dist = _ball_distances(n, samples, seed, threads)
    out = []
    for r in radii:
        if r < 0:
            raise ValueError("radius must be nonnegative")
        hits = int(np.count_nonzero(dist < r))
        lo, hi = _binomial_ci(hits, samples, confidence)
        out.append(VolumeEstimate({"n": n, "r": float(r)}, hits, samples, hits / samples, lo, hi, confidence, seed))
    return out


def ball_volume_mc(n: int, r: float, samples: int = 100_000, seed: int = 0, confidence: float = 0.95, threads: int = 1) -> VolumeEstimate:
    """Fraction of Haar samples of SO(n) with ``hs(X, id) < r``, with a Clopper-Pearson interval."""
    return ball_volume_curve(n, [r], samples, seed, confidence, threads)[0]


def fit_ball_constants(estimates) -> tuple[float, float]:
    """Fit ``ln H(B(id, r)) = psi n^2 (phi + ln r - ln sqrt(n))`` by least squares.

    Only estimates with at least one hit are used. Returns ``(phi, psi)``.
    """
    xs, ys = [], []
    for e in estimates:
        if e.hits == 0:
            continue
        n, r = e.params["n"], e.params["r"]
        xs.append(math.log(r) - 0.5 * math.log(n))
        ys.append(math.log(e.estimate) / n**2)
    if len(xs) < 2 or np.ptp(xs) == 0:
        raise ValueError("need hits at two or more distinct values of r / sqrt(n)")
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(intercept / slope), float(slope)


def cap_bracket(m: int, tau: float) -> tuple[float, float]:
    """Lower and upper bounds on the normalised cap volume ``{x in S^m : x_1 > tau}``."""
    core = (1 - tau * tau) ** ((m - 1) / 2)
    return core / (6 * tau * math.sqrt(m)), core / (2 * tau * math.sqrt(m))


def cap_volume_mc(m: int, tau: float, samples: int = 1_000_000, seed: int = 0, confidence: float = 0.95, threads: int = 1) -> VolumeEstimate:
    """Fraction of uniform points on the unit sphere ``S^m`` (in R^(m+1)) with first coordinate above ``tau``.

    Valid for ``2 / sqrt(m) <= tau <= 1``; the report carries the two-sided
    bracket from :func:`cap_bracket`.
    """
    if m < 2:
        raise ValueError(f"need m >= 2, got {m}")
    if not 2 / math.sqrt(m) <= tau <= 1:
        raise ValueError(f"tau must lie in [2/sqrt(m), 1] = [{2 / math.sqrt(m):.6g}, 1], got {tau}")

    def run(block):
        b, size = block
        g = substream(seed, 0, b).standard_normal((size, m + 1))
        first = g[:, 0] / np.linalg.norm(g, axis=1)
        return int(np.count_nonzero(first > tau))

    hits = sum(_map(run, _chunks(samples, 1 << 16), threads))
    lo, hi = _binomial_ci(hits, samples, confidence)
    return VolumeEstimate({"m": m, "tau": float(tau)}, hits, samples, hits / samples, lo, hi, confidence, seed, cap_bracket(m, tau))


# ---------------------------------------------------------------- lower bound


@dataclass(frozen=True)
class LowerBound:
    n: int
    eps: float
    ln_packing: float
    value: float
    bound: int
    iterations: int
    history: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def lower_bound_calculator(n: int, eps: float, ln_packing: float, tau_guess: float = 1.0, max_iter: int = 100, tol: float = 1e-12) -> LowerBound:
    """Mixing-time lower bound from a packing number of radius ``8 eps``.

    Solves ``tau = (ln N - ln 2) / ln(pi n^2 tau / eps)`` by fixed-point
    iteration from ``tau_guess``. The right-hand side decreases in ``tau``,
    so iterates alternate around the fixed point (even and odd iterates are
    each monotone). Returns the fixed point and its floor.
    """
    if n < 2 or eps <= 0:
        raise ValueError("need n >= 2 and eps > 0")
    numer = ln_packing - math.log(2)
    if numer <= 0:
        return LowerBound(n, eps, ln_packing, 0.0, 0, 0, (0.0,))
    c = math.pi * n * n / eps
    tau = float(tau_guess)
    history = [tau]
    for it in range(1, max_iter + 1):
        if c * tau <= 1:
            raise ValueError(f"iterate {tau:g} leaves the range where the covering estimate is meaningful")
        new = numer / math.log(c * tau)
        history.append(new)
        if abs(new - tau) <= tol * max(1.0, abs(new)):
            return LowerBound(n, eps, ln_packing, new, math.floor(new), it, tuple(history))
        tau = new
    raise ConvergenceError(f"no convergence in {max_iter} iterations", tau)


def packing_lower_bound_pipeline(ns, eps: float, samples: int = 200_000, seed: int = 0, threads: int = 1):
    """Ball-volume Monte Carlo at radius ``8 eps`` feeding :func:`lower_bound_calculator` for each ``n``."""
    out = []
    for n in ns:
        vol = ball_volume_mc(n, 8 * eps, samples, seed, threads=threads)
        out.append((vol, lower_bound_calculator(n, eps, vol.ln_packing)))
    return out
