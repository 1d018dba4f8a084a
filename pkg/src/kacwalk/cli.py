"""Command-line interface: one subcommand per experiment or transform.

Every subcommand writes into ``--out-dir`` only: its data files (CSV/JSON,
matrix snapshots) and a ``manifest.json`` recording the flags, seed, package
version, wall time and the list of outputs. Data files are a pure function of
the flags and seed (independent of ``--threads``); the wall time lives only in
the manifest. ``replay`` reruns a manifest.

Exit status: 0 on success, 1 on runtime failure (partial outputs are
removed), 2 on invalid flags.
"""
from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
import time
from importlib import metadata
from pathlib import Path


from . import experiments as ex
from .couplings import TRACE_COLUMNS, run_coupled_walk
from .dimreduce import PointCloud, default_steps, distortion_report, haar_jl_baseline, kac_jl_transform
from .geometry import identity
from .io import read_matrix_dir, read_points_csv, write_csv, write_json, write_matrix
from .transport import METRICS, EmpiricalMeasure, dual_lower_bound, empirical_wasserstein
from .walks import KINDS, AngleDensity, WalkConfig, haar_sample, run_walk, substream

MANIFEST = "manifest.json"


class UsageError(Exception):
    """Invalid flag value; reported with exit status 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def parse_density(spec: str) -> AngleDensity:
    """``uniform``, ``cosine:W`` or ``triangular:W`` with ``W = 2 pi rho_min`` in (0, 1]."""
    name, _, arg = spec.partition(":")
    try:
        if name == "uniform" and not arg:
            return AngleDensity.uniform()
        if name in ("cosine", "triangular"):
            w = float(arg) if arg else 0.5
            return getattr(AngleDensity, name)(w)
    except ValueError as err:
        raise UsageError(f"--density: {err}") from err
    raise UsageError(f"--density: expected uniform, cosine:W or triangular:W, got {spec!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _require(cond: bool, flag: str, message: str) -> None:
    if not cond:
        raise UsageError(f"{flag}: {message}")


class Outputs:
    """Tracks files written under the output directory so a failed run can be cleaned up."""

    def __init__(self, root: Path):
        self.root = root
        self.created_root = not root.exists()
        self.files: list[Path] = []
        self.dirs: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        missing = []
        parent = p.parent
        while not parent.exists():
            missing.append(parent)
            parent = parent.parent
        for d in reversed(missing):
            d.mkdir()
            self.dirs.append(d)
        self.files.append(p)
        return p

    def relative(self) -> list[str]:
        return [str(p.relative_to(self.root)) for p in self.files]

    def discard(self) -> None:
        for p in self.files:
            p.unlink(missing_ok=True)
        for d in reversed(self.dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()
        if self.created_root and self.root.exists() and not any(self.root.iterdir()):
            self.root.rmdir()


def _report(args, label: str, estimate, predicted=None) -> None:
    line = f"{label}: {estimate:.6g}" if isinstance(estimate, float) else f"{label}: {estimate}"
    if args.predicted and predicted is not None:
        line += f"   predicted: {predicted:.6g}"
    print(line)


# ---------------------------------------------------------------- subcommands


def cmd_walk(args, out: Outputs) -> dict:
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(args.steps >= 0, "--steps", "must be >= 0")
    times = sorted(set(args.snapshot_times or [args.steps]))
    _require(all(0 <= t <= args.steps for t in times), "--snapshot-times", f"times must lie in [0, {args.steps}]")
    density = parse_density(args.density) if args.kind == "density" else None
    config = WalkConfig(args.n, args.kind, args.seed, density, args.repair_period)
    fld = config.field
    if args.start == "identity":
        x0 = identity(args.n, fld)
    elif args.start == "haar":
        x0 = haar_sample(args.n, fld, substream(args.seed, 1))
    else:
        x0 = ex.worst_case_start(args.n, fld)
    traj = run_walk(x0, args.steps, config, times)
    rows = []
    for t, x in traj.snapshots:
        name = f"snapshots/t{t:09d}.txt"
        write_matrix(out.path(name), x)
        rows.append((t, name))
    write_csv(out.path("trajectory.csv"), ("t", "snapshot"), rows)
    summary = {"n": args.n, "kind": args.kind, "steps": args.steps, **traj.summary}
    write_json(out.path("summary.json"), summary)
    _report(args, "orthogonality defect", traj.summary["orthogonality_defect"])
    return summary


def cmd_couple(args, out: Outputs) -> dict:
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(args.steps >= 0, "--steps", "must be >= 0")
    _require(0 <= args.d0 <= math.pi, "--d0", "must lie in [0, pi]")
    density = parse_density(args.density) if args.kind == "density" else None
    fld = ex.field_for(args.kind)
    x0, y0 = ex.pairs_at_distance(args.n, fld, args.d0, 1, substream(args.seed, 1))
    trace = run_coupled_walk(x0[0], y0[0], args.steps, args.kind, args.seed, density)
    write_csv(out.path("trace.csv"), TRACE_COLUMNS, trace.rows())
    d = trace.distances
    summary = {
        "n": args.n,
        "kind": args.kind,
        "steps": args.steps,
        "initial_distance": trace.initial_distance,
        "final_distance": float(d[-1]),
        "max_distance": float(d.max()),
        "diameter_bound": math.pi * math.sqrt(args.n),
    }
    write_json(out.path("summary.json"), summary)
    _report(args, "final distance", float(d[-1]))
    return summary


def cmd_contraction(args, out: Outputs) -> dict:
    _require(0 < args.r <= ex.MAX_PROBE_RADIUS, "--r", f"must lie in (0, {ex.MAX_PROBE_RADIUS}]")
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(args.trials >= 1 and args.trials_per_pair >= 1, "--trials", "must be positive")
    density = parse_density(args.density) if args.kind == "density" else None
    rep = ex.local_contraction_probe(args.n, args.kind, args.r, args.trials, args.trials_per_pair, args.seed, density, args.threads)
    d = rep.to_dict()
    d["mean"] = d["mean_ratio"]
    write_csv(out.path("contraction.csv"), tuple(d), [tuple(d.values())])
    write_json(out.path("summary.json"), d)
    _report(args, "mean D^2/r^2", rep.mean_ratio, rep.predicted)
    if rep.second_order_prediction is not None and args.predicted:
        print(f"second-order prediction from sampled pairs: {rep.second_order_prediction:.6g}")
    return d


def cmd_decay(args, out: Outputs) -> dict:
    _require(0 <= args.d0 <= ex.MAX_DECAY_DISTANCE, "--d0", f"must lie in [0, {ex.MAX_DECAY_DISTANCE}]")
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(args.steps >= 2 and args.trials >= 2, "--steps/--trials", "need at least 2 of each")
    density = parse_density(args.density) if args.kind == "density" else None
    rep = ex.coupled_decay_curve(args.n, args.kind, args.steps, args.trials, args.seed, args.d0, density, args.rel_se, args.threads)
    rows = zip(rep.times.tolist(), rep.mean_d2.tolist(), rep.stderr_d2.tolist())
    write_csv(out.path("decay.csv"), ("t", "mean_D2", "stderr_D2"), rows)
    d = rep.to_dict()
    write_json(out.path("summary.json"), d)
    _report(args, "slope of log E[D^2]", rep.slope, rep.predicted)
    return d


def cmd_mix(args, out: Outputs) -> dict:
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(1 <= args.N <= ex.MAX_MIX_SAMPLES, "--N", f"must lie in [1, {ex.MAX_MIX_SAMPLES}]")
    _require(all(t >= 0 for t in args.t) and args.t, "--t", "need nonnegative times")
    _require(args.p >= 1, "--p", "must be >= 1")
    _require(args.replicates >= 2, "--replicates", "need at least 2")
    density = parse_density(args.density) if args.kind == "density" else None
    fld = ex.field_for(args.kind)
    start = identity(args.n, fld) if args.start == "identity" else None
    curve = ex.mixing_curve(args.n, args.kind, args.t, args.N, args.metric, args.p, args.seed, args.replicates, start, density, args.threads)
    z = curve.spreads_above()
    write_csv(
        out.path("mixing.csv"),
        ("t", "estimate", "spreads_above_baseline", "within_2_spreads"),
        [(t, e, float(s), bool(abs(s) <= 2)) for t, e, s in zip(curve.times, curve.estimates, z)],
    )
    write_csv(out.path("baseline.csv"), ("replicate", "wasserstein"), enumerate(curve.baseline_values))
    d = curve.to_dict()
    d["mixing_time_bound_eps_0.1"] = ex.mixing_time_bound(args.n, 0.1)
    write_json(out.path("summary.json"), d)
    for t, e, s in zip(curve.times, curve.estimates, z):
        print(f"t={t}: W={e:.6g} baseline={curve.baseline:.6g} ({s:+.2f} spreads)")
    if args.predicted:
        print(f"predicted mixing time (eps=0.1): {ex.mixing_time_bound(args.n, 0.1)}")
    return d


def cmd_diameter(args, out: Outputs) -> dict:
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(args.trials >= 0, "--trials", "must be >= 0")
    rep = ex.diameter_probe(args.n, args.trials, args.seed, threads=args.threads)
    d = rep.to_dict()
    write_csv(out.path("diameter.csv"), tuple(d), [tuple(d.values())])
    write_json(out.path("summary.json"), d)
    _report(args, "max observed D", rep.max_observed, rep.bound)
    return d


def cmd_sandwich(args, out: Outputs) -> dict:
    _require(args.n >= 2, "--n", f"dimension must be >= 2, got {args.n}")
    _require(all(0 < s <= 0.5 for s in args.scales), "--scales", "scales must lie in (0, 0.5]")
    _require(args.trials >= 1, "--trials", "must be positive")
    rep = ex.metric_sandwich_probe(args.n, args.trials, args.scales, args.seed)
    rows = [r.__dict__ for r in rep.rows]
    write_csv(out.path("sandwich.csv"), tuple(rows[0]), [tuple(r.values()) for r in rows])
    d = rep.to_dict()
    d["hs_below_geodesic"] = rep.hs_below_geodesic
    write_json(out.path("summary.json"), d)
    _report(args, "hs <= D on all pairs", str(rep.hs_below_geodesic))
    return d


def cmd_volume(args, out: Outputs) -> dict:
    _require(args.n >= 3, "--n", f"dimension must be >= 3, got {args.n}")
    _require(all(r >= 0 for r in args.r), "--r", "radii must be nonnegative")
    _require(args.samples >= 1, "--samples", "must be positive")
    ests = ex.ball_volume_curve(args.n, args.r, args.samples, args.seed, threads=args.threads)
    cols = ("r", "hits", "samples", "estimate", "ci_low", "ci_high", "ln_packing")
    write_csv(out.path("volume.csv"), cols, [(e.params["r"], e.hits, e.samples, e.estimate, e.ci_low, e.ci_high, e.ln_packing) for e in ests])
    d = {"n": args.n, "estimates": [e.to_dict() for e in ests]}
    try:
        d["phi"], d["psi"] = ex.fit_ball_constants(ests)
    except ValueError:
        d["phi"] = d["psi"] = None
    write_json(out.path("summary.json"), d)
    for e in ests:
        print(f"r={e.params['r']:g}: {e.estimate:.6g} [{e.ci_low:.3g}, {e.ci_high:.3g}]")
    return d


def cmd_cap(args, out: Outputs) -> dict:
    _require(args.m >= 2, "--m", f"sphere dimension must be >= 2, got {args.m}")
    _require(2 / math.sqrt(args.m) <= args.tau <= 1, "--tau", f"must lie in [2/sqrt(m), 1] = [{2 / math.sqrt(args.m):.6g}, 1]")
    _require(args.samples >= 1, "--samples", "must be positive")
    e = ex.cap_volume_mc(args.m, args.tau, args.samples, args.seed, threads=args.threads)
    lo, hi = e.bracket
    write_csv(
        out.path("cap.csv"),
        ("m", "tau", "hits", "samples", "estimate", "ci_low", "ci_high", "bracket_low", "bracket_high"),
        [(args.m, args.tau, e.hits, e.samples, e.estimate, e.ci_low, e.ci_high, lo, hi)],
    )
    d = e.to_dict()
    write_json(out.path("summary.json"), d)
    _report(args, "cap volume", e.estimate, None)
    if args.predicted:
        print(f"bracket: [{lo:.6g}, {hi:.6g}]")
    return d


def cmd_lower_bound(args, out: Outputs) -> dict:
    _require(args.eps > 0, "--eps", "must be positive")
    _require(all(n >= 3 for n in args.n), "--n", "dimensions must be >= 3")
    rows = []
    for n in args.n:
        if args.ln_packing is not None:
            ln_pack, hits, samples = args.ln_packing, None, None
        else:
            vol = ex.ball_volume_mc(n, 8 * args.eps, args.samples, args.seed, threads=args.threads)
            ln_pack, hits, samples = vol.ln_packing, vol.hits, vol.samples
        lb = ex.lower_bound_calculator(n, args.eps, ln_pack)
        rows.append((n, args.eps, hits, samples, ln_pack, lb.value, lb.bound, lb.iterations))
        print(f"n={n}: ln N >= {ln_pack:.6g}, bound {lb.value:.6g} (floor {lb.bound})")
    cols = ("n", "eps", "hits", "samples", "ln_packing", "fixed_point", "bound", "iterations")
    write_csv(out.path("lower_bound.csv"), cols, rows)
    d = {"rows": [dict(zip(cols, r)) for r in rows]}
    write_json(out.path("summary.json"), d)
    return d


def cmd_wasserstein(args, out: Outputs) -> dict:
    _require(args.p >= 1, "--p", "must be >= 1")
    a = read_matrix_dir(args.a)
    b = read_matrix_dir(args.b)
    _require(a.shape[0] == b.shape[0], "--a/--b", f"sample counts differ ({a.shape[0]} vs {b.shape[0]})")
    ma, mb = EmpiricalMeasure(a), EmpiricalMeasure(b)
    w = empirical_wasserstein(ma, mb, args.metric, args.p)
    dual = dual_lower_bound(ma, mb, args.metric)
    d = {"p": args.p, "metric": args.metric, "N": int(a.shape[0]), "wasserstein": w, "dual_lower_bound": dual}
    write_json(out.path("result.json"), d)
    _report(args, "wasserstein", w)
    return d


def cmd_jl(args, out: Outputs) -> dict:
    if args.input:
        pts, labels = read_points_csv(args.input, args.labels)
        cloud = PointCloud(pts, labels)
    else:
        _require(args.n >= 2 and args.points >= 2, "--n/--points", "need n >= 2 and at least 2 points")
        cloud = PointCloud(substream(args.seed, 2).standard_normal((args.points, args.n)))
    n = cloud.dim
    _require(1 <= args.k <= n, "--k", f"must lie in [1, {n}]")
    t = default_steps(n) if args.t is None else args.t
    _require(t >= 0, "--t", "must be >= 0")
    kac = kac_jl_transform(cloud, args.k, t, args.seed)
    haar = haar_jl_baseline(cloud, args.k, args.seed)
    rk = distortion_report(cloud, kac, args.k, t, args.seed)
    rh = distortion_report(cloud, haar, args.k, None, args.seed)
    cols = ([] if cloud.labels is None else ["label"]) + [f"y{c}" for c in range(args.k)]
    lab = cloud.labels or [None] * len(cloud)
    for name, pc in (("kac_points.csv", kac), ("haar_points.csv", haar)):
        rows = [([] if cloud.labels is None else [lab[q]]) + pc.points[q].tolist() for q in range(len(pc))]
        write_csv(out.path(name), cols, rows)
    d = {"n": n, "k": args.k, "t": t, "points": len(cloud), "kac": rk.to_dict(), "haar": rh.to_dict(),
         "jl_epsilon_scale": math.sqrt(8 * math.log(len(cloud)) / args.k)}
    write_json(out.path("summary.json"), d)
    _report(args, "Kac distortion eps", rk.epsilon)
    _report(args, "Haar distortion eps", rh.epsilon)
    return d


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0); all randomness derives from it")
    p.add_argument("--out-dir", default="kacwalk-out", help="directory for all outputs (created if missing)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it (default 1)")
    p.add_argument("--predicted", action="store_true", help="print the theoretical prediction next to the estimate")


def _kind(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=KINDS, default="kac", help="kac: uniform angle; density: angle from --density; unitary: Haar U(2) on U(n)")
    p.add_argument("--density", default="cosine:0.5", help="angle density for --kind density: uniform, cosine:W or triangular:W, W = 2*pi*min density in (0,1] (default cosine:0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kacwalk", description="Kac's random walk on SO(n)/U(n): couplings, mixing and transport experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk", help="run one walk and save matrix snapshots", description="Run one walk (requires n >= 2) and write trajectory.csv, snapshots/ and summary.json.")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    _kind(p)
    p.add_argument("--steps", type=int, required=True, help="number of steps, >= 0")
    p.add_argument("--snapshot-times", type=_int_list, default=None, help="comma-separated times in [0, steps] (default: the last step; t=0 is always saved)")
    p.add_argument("--start", choices=("identity", "haar", "worst"), default="identity", help="initial state (default identity)")
    p.add_argument("--repair-period", type=int, default=10_000, help="re-orthonormalize every this many steps; 0 disables (default 10000)")
    _common(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("couple", help="run one coupled pair and write its per-step trace", description="Coupled walk from a random pair at distance --d0; writes trace.csv and summary.json.")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    _kind(p)
    p.add_argument("--steps", type=int, default=200, help="steps (default 200)")
    p.add_argument("--d0", type=float, default=0.05, help="initial geodesic distance in [0, pi] (default 0.05)")
    _common(p)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("contraction", help="one-step contraction probe", description="Mean D(X,Y)^2/r^2 after one coupled step from pairs at distance r (requires 0 < r <= 0.05).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2 (>= 3 for a nontrivial coefficient)")
    _kind(p)
    p.add_argument("--r", type=float, default=1e-3, help="probe distance in (0, 0.05] (default 1e-3)")
    p.add_argument("--trials", type=int, default=100_000, help="number of random pairs (default 100000)")
    p.add_argument("--trials-per-pair", type=int, default=1, help="coupled steps per pair (default 1)")
    _common(p)
    p.set_defaults(func=cmd_contraction)

    p = sub.add_parser("decay", help="decay rate of E[D^2] along coupled trajectories", description="Fit the slope of log E[D_t^2] (requires initial distance <= 0.1).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    _kind(p)
    p.add_argument("--steps", type=int, default=200, help="steps per trajectory (default 200)")
    p.add_argument("--trials", type=int, default=10_000, help="trajectories (default 10000)")
    p.add_argument("--d0", type=float, default=0.05, help="initial distance in [0, 0.1] (default 0.05)")
    p.add_argument("--rel-se", type=float, default=0.1, help="max relative standard error of a fitted point (default 0.1)")
    _common(p)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("mix", help="empirical Wasserstein distance to Haar over time", description="W between walk samples at times --t and fresh Haar samples, with a Haar-vs-Haar baseline (requires N <= 500).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    _kind(p)
    p.add_argument("--t", type=_int_list, required=True, help="comma-separated step counts")
    p.add_argument("--N", type=int, default=200, help="sample size, <= 500 (default 200)")
    p.add_argument("--metric", choices=METRICS, default="D", help="ground metric (default D)")
    p.add_argument("--p", type=float, default=2.0, help="Wasserstein exponent >= 1 (default 2)")
    p.add_argument("--replicates", type=int, default=20, help="baseline replicates, >= 2 (default 20)")
    p.add_argument("--start", choices=("worst", "identity"), default="worst", help="start: far block rotation or identity (default worst)")
    _common(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("diameter", help="largest geodesic distance between random pairs", description="Max D over random Haar pairs vs pi*sqrt(n) (requires n >= 2).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    p.add_argument("--trials", type=int, default=10_000, help="random pairs (default 10000)")
    _common(p)
    p.set_defaults(func=cmd_diameter)

    p = sub.add_parser("sandwich", help="compare hs, D and the tangent projection", description="Fitted residual constants at several scales (scales in (0, 0.5]).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 2")
    p.add_argument("--trials", type=int, default=2000, help="pairs per scale (default 2000)")
    p.add_argument("--scales", type=_float_list, default=[0.05, 0.1, 0.2, 0.5], help="comma-separated scales in (0, 0.5]")
    _common(p)
    p.set_defaults(func=cmd_sandwich)

    p = sub.add_parser("volume", help="Haar measure of hs-balls around the identity", description="Monte Carlo ball volumes in SO(n) (requires n >= 3).")
    p.add_argument("--n", type=int, required=True, help="dimension, >= 3")
    p.add_argument("--r", type=_float_list, required=True, help="comma-separated radii >= 0")
    p.add_argument("--samples", type=int, default=100_000, help="Haar samples (default 100000)")
    _common(p)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("cap", help="spherical cap volume", description="Fraction of S^m with first coordinate > tau (requires m >= 2, 2/sqrt(m) <= tau <= 1).")
    p.add_argument("--m", type=int, required=True, help="sphere dimension, >= 2")
    p.add_argument("--tau", type=float, required=True, help="threshold in [2/sqrt(m), 1]")
    p.add_argument("--samples", type=int, default=1_000_000, help="uniform points (default 1000000)")
    _common(p)
    p.set_defaults(func=cmd_cap)

    p = sub.add_parser("lower-bound", help="mixing-time lower bound from packing numbers", description="Fixed-point lower bound fed by ball volumes at radius 8*eps (or a given ln-packing).")
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated dimensions, each >= 3")
    p.add_argument("--eps", type=float, required=True, help="distance threshold > 0")
    p.add_argument("--ln-packing", type=float, default=None, help="use this ln packing number instead of Monte Carlo")
    p.add_argument("--samples", type=int, default=200_000, help="Haar samples per dimension (default 200000)")
    _common(p)
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("wasserstein", help="exact empirical W between two matrix directories", description="Reads *.txt matrices from two directories of equal size; writes result.json.")
    p.add_argument("--a", required=True, help="directory of matrix files")
    p.add_argument("--b", required=True, help="directory of matrix files")
    p.add_argument("--metric", choices=METRICS, default="D", help="ground metric (default D)")
    p.add_argument("--p", type=float, default=2.0, help="exponent >= 1 (default 2)")
    _common(p)
    p.set_defaults(func=cmd_wasserstein)

    p = sub.add_parser("jl", help="Kac-walk dimension reduction vs an exact Haar rotation", description="Project a point cloud to k dimensions (requires 1 <= k <= n).")
    p.add_argument("--input", default=None, help="CSV of points (default: Gaussian points from the seed)")
    p.add_argument("--labels", action="store_true", help="first CSV column holds labels")
    p.add_argument("--n", type=int, default=64, help="dimension of generated points (default 64)")
    p.add_argument("--points", type=int, default=20, help="number of generated points (default 20)")
    p.add_argument("--k", type=int, default=16, help="target dimension (default 16)")
    p.add_argument("--t", type=int, default=None, help="Kac steps (default ceil(n^2 ln(pi sqrt(n)/0.1)))")
    _common(p)
    p.set_defaults(func=cmd_jl)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest", description="Rerun a manifest's command, writing into --out-dir.")
    p.add_argument("manifest", help="path to manifest.json")
    p.add_argument("--out-dir", required=True, help="directory for the replayed outputs")
    p.set_defaults(func=None)
    return parser


def _argv_without_out_dir(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out-dir":
            skip = True
            continue
        if a.startswith("--out-dir="):
            continue
        out.append(a)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            recorded = json.loads(Path(args.manifest).read_text())["argv"]
        except (OSError, ValueError, KeyError) as err:
            print(f"kacwalk: error: cannot read manifest: {err}", file=sys.stderr)
            return 2
        return main([*recorded, "--out-dir", args.out_dir])
    if args.threads < 1:
        parser.error("--threads: must be >= 1")
    out = Outputs(Path(args.out_dir))
    start = time.perf_counter()
    try:
        out.root.mkdir(parents=True, exist_ok=True)
        args.func(args, out)
        flags = {k: v for k, v in vars(args).items() if k != "func"}
        manifest = {
            "subcommand": args.command,
            "argv": _argv_without_out_dir(argv),
            "command_line": "kacwalk " + shlex.join(argv),
            "flags": flags,
            "seed": args.seed,
            "version": _version(),
            "wall_time_s": time.perf_counter() - start,
            "outputs": out.relative(),
        }
        write_json(out.path(MANIFEST), manifest)
    except UsageError as err:
        out.discard()
        print(f"kacwalk {args.command}: error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure: clean up and report
        out.discard()
        print(f"kacwalk {args.command}: runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
