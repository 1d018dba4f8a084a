"""Exact Wasserstein distances between equal-size empirical measures on a matrix group.

For two samples ``A = (a_1..a_N)`` and ``B = (b_1..b_N)`` with equal weights the
optimal coupling can be taken to be a permutation, so

    W_{d,p}(A, B) = ( min_sigma (1/N) sum_i d(a_i, b_sigma(i))^p )^(1/p)

is computed exactly with a Hungarian (Kuhn-Munkres) solver. A cheap certified
lower bound on ``W_{d,1}`` comes from the dual side: every ``f = d(., anchor)``
is 1-Lipschitz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import eigen_phases, field_of

METRICS = ("hs", "D")


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Equal-weight sample of group elements, stored as an ``(N, n, n)`` stack."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[0] < 1:
            raise ValueError(f"expected a nonempty (N, n, n) stack, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def field(self) -> str:
        return field_of(self.samples)

    def left_multiply(self, c: np.ndarray) -> "EmpiricalMeasure":
        return EmpiricalMeasure(np.asarray(c) @ self.samples)


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    metric: str
    p: float


@dataclass(frozen=True)
class Assignment:
    """Row ``i`` is matched to column ``permutation[i]``."""

    permutation: np.ndarray
    total_cost: float


def _check_pair(a: EmpiricalMeasure, b: EmpiricalMeasure, equal_size: bool = True) -> None:
    if a.n != b.n or a.field != b.field:
        raise ValueError("samples differ in dimension or field")
    if equal_size and len(a) != len(b):
        raise ValueError(f"sample counts differ: {len(a)} vs {len(b)}")


def pairwise_distances(a: np.ndarray, b: np.ndarray, metric: str, chunk_bytes: int = 1 << 26) -> np.ndarray:
    """``d(a_i, b_j)`` for all i, j; ``a`` and ``b`` are stacks of group elements."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    na, nb, n = a.shape[0], b.shape[0], a.shape[1]
    out = np.empty((na, nb))
    rows = max(1, chunk_bytes // max(1, nb * n * n * a.itemsize))
    bh = np.conj(np.swapaxes(b, -1, -2))
    for start in range(0, na, rows):
        blk = a[start : start + rows]
        if metric == "hs":
            diff = blk[:, None] - b[None]
            out[start : start + rows] = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(-2, -1)))
        else:
            # D(a_i, b_j) from the phases of a_i b_j^H (same spectrum as b_j a_i^H up to conjugation)
            c = blk[:, None] @ bh[None]
            out[start : start + rows] = np.sqrt(np.sum(eigen_phases(c) ** 2, axis=-1))
    return out


def cost_matrix(a: EmpiricalMeasure, b: EmpiricalMeasure, metric: str = "D", p: float = 2.0) -> CostMatrix:
    """Entry ``(i, j)`` is ``d(a_i, b_j) ** p``."""
    _check_pair(a, b)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return CostMatrix(pairwise_distances(a.samples, b.samples, metric) ** p, metric, float(p))


def _hungarian(c: np.ndarray):
    """Shortest-augmenting-path Hungarian method with potentials.

    Returns ``(row_to_col, u, v)`` where ``c[i, j] - u[i] - v[j] >= 0`` with
    equality on the matching.
    """
    n = c.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)  # p[j] = row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv, inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            idx = np.flatnonzero(used)
            u[p[idx]] += delta
            v[idx] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.intp)
    row_to_col[p[1:] - 1] = np.arange(n)
    return row_to_col, u[1:], v[1:]


def _lexicographic_tight_matching(tight: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Lexicographically smallest perfect matching inside the boolean graph ``tight``.

    ``start`` is any perfect matching of ``tight``. Rows are fixed in order;
    for each, the smallest feasible column is found by alternating-path
    repair of the current matching over the unfixed rows.
    """
    n = tight.shape[0]
    match = start.copy()  # row -> col
    owner = np.empty(n, dtype=np.intp)
    owner[match] = np.arange(n)  # col -> row
    adj = [np.flatnonzero(tight[r]) for r in range(n)]
    fixed_cols = np.zeros(n, dtype=bool)

    def augment(row: int, target: int, seen: np.ndarray) -> bool:
        # find an alternating path from `row` to the free column `target`
        for col in adj[row]:
            if fixed_cols[col] or seen[col]:
                continue
            seen[col] = True
            if col == target or augment(owner[col], target, seen):
                match[row] = col
                owner[col] = row
                return True
        return False

    for r in range(n):
        for col in adj[r]:
            if fixed_cols[col]:
                continue
            if col == match[r]:
                break
            # try r -> col: the row holding col must move to r's old column
            old_col, other = match[r], owner[col]
            saved = (match.copy(), owner.copy())
            match[r], owner[col] = col, r
            fixed_cols[col] = True
            seen = np.zeros(n, dtype=bool)
            if augment(other, old_col, seen):
                fixed_cols[col] = False
                break
            match[:], owner[:] = saved
            fixed_cols[col] = False
        fixed_cols[match[r]] = True
    return match


def solve_assignment(c) -> Assignment:
    """Minimum-cost perfect matching of a square cost matrix.

    Exact (O(N^3) Hungarian method). Among optimal permutations the
    lexicographically smallest one is returned.
    """
    values = np.asarray(c.values if isinstance(c, CostMatrix) else c, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("cost matrix has non-finite entries")
    n = values.shape[0]
    if n == 0:
        return Assignment(np.empty(0, dtype=np.intp), 0.0)
    perm, u, v = _hungarian(values)
    reduced = values - u[:, None] - v[None, :]
    tol = 1e-12 * n * max(1.0, float(np.max(np.abs(values))))
    tight = reduced <= tol
    if np.count_nonzero(tight) > n:
        perm = _lexicographic_tight_matching(tight, perm)
    total = float(values[np.arange(n), perm].sum())
    return Assignment(perm, total)


def empirical_wasserstein(a: EmpiricalMeasure, b: EmpiricalMeasure, metric: str = "D", p: float = 2.0) -> float:
    """Exact ``W_{d,p}`` between two equal-weight samples of the same size."""
    cm = cost_matrix(a, b, metric, p)
    assignment = solve_assignment(cm)
    return float(max(assignment.total_cost, 0.0) / len(a)) ** (1.0 / p)


def dual_lower_bound(a: EmpiricalMeasure, b: EmpiricalMeasure, metric: str = "D", anchors=None) -> float:
    """``max_anchor |mean_A d(., anchor) - mean_B d(., anchor)|`` <= ``W_{d,1}(A, B)``.

    Anchors default to the union of both samples.
    """
    _check_pair(a, b, equal_size=False)
    if anchors is None:
        anchors = np.concatenate([a.samples, b.samples])
    anchors = np.asarray(anchors)
    if anchors.ndim == 2:
        anchors = anchors[None]
    if anchors.shape[0] == 0:
        raise ValueError("need at least one anchor")
    fa = pairwise_distances(anchors, a.samples, metric).mean(axis=1)
    fb = pairwise_distances(anchors, b.samples, metric).mean(axis=1)
    return float(np.max(np.abs(fa - fb)))
