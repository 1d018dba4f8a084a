"""Matrix-group primitives for SO(n) and U(n).

Group elements are plain numpy arrays: a real ``float64`` array is an element
of SO(n), a complex ``complex128`` array an element of U(n). Functions that
take group elements accept stacks of shape ``(..., n, n)`` where that is
natural (distances, projections), so that Monte Carlo code can work on a
whole batch of states at once.

Indices are zero-based throughout: ``planar_rotation(0, 1, theta, n)`` rotates
the plane spanned by the first two basis vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

ORTHO_TOL = 1e-10
REAL = "real"
COMPLEX = "complex"


class GroupError(ValueError):
    """Raised when an array is not (close enough to) a group element."""


def field_of(a: np.ndarray) -> str:
    return COMPLEX if np.iscomplexobj(a) else REAL


def orthogonality_defect(a: np.ndarray) -> float:
    """Largest entry of ``|a^H a - id|`` (over a stack, the largest overall)."""
    a = np.asarray(a)
    n = a.shape[-1]
    gram = np.conj(np.swapaxes(a, -1, -2)) @ a
    return float(np.max(np.abs(gram - np.eye(n))))


def check_group_element(a, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate ``a`` as an element of SO(n) (real) or U(n) (complex).

    Returns the array (as float64 or complex128) or raises ``GroupError``.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GroupError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 2:
        raise GroupError("dimension must be at least 2")
    a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=False)
    defect = orthogonality_defect(a)
    if defect > tol:
        raise GroupError(f"columns not orthonormal (defect {defect:.3g} > {tol:g})")
    if not np.iscomplexobj(a):
        det = np.linalg.det(a)
        if abs(det - 1.0) > tol:
            raise GroupError(f"determinant {det:.12g} is not +1")
    return a


def identity(n: int, field: str = REAL) -> np.ndarray:
    return np.eye(n, dtype=np.complex128 if field == COMPLEX else np.float64)


def _check_pair(i: int, j: int, n: int) -> None:
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"plane ({i}, {j}) out of range for n={n}")
    if i >= j:
        raise ValueError(f"need i < j, got ({i}, {j})")


def rotation_block(theta) -> np.ndarray:
    """2x2 block ``[[cos, -sin], [sin, cos]]`` acting on rows (i, j)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def planar_rotation(i: int, j: int, theta: float, n: int) -> np.ndarray:
    """Rotation by ``theta`` of the plane spanned by ``e_i`` and ``e_j``.

    ``e_i -> cos(theta) e_i + sin(theta) e_j`` and
    ``e_j -> cos(theta) e_j - sin(theta) e_i``; every other basis vector is
    fixed.
    """
    _check_pair(i, j, n)
    r = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    r[i, i] = c
    r[j, j] = c
    r[j, i] = s
    r[i, j] = -s
    return r


def embed_2x2(u: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    """The n x n operator acting as ``u`` on span{e_i, e_j} and as id elsewhere."""
    _check_pair(i, j, n)
    out = np.eye(n, dtype=np.result_type(u, np.float64))
    idx = np.ix_([i, j], [i, j])
    out[idx] = u
    return out


def _check_compatible(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(f"dimension mismatch: {a.shape[-2:]} vs {b.shape[-2:]}")
    if np.iscomplexobj(a) != np.iscomplexobj(b):
        raise ValueError("field mismatch: one real, one complex argument")
    return a, b


def hs_norm(m) -> np.ndarray | float:
    m = np.asarray(m)
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def hs_distance(a, b):
    """Hilbert-Schmidt distance ``sqrt(Tr((a-b)^H (a-b)))``."""
    a, b = _check_compatible(a, b)
    return hs_norm(a - b)


def eigen_phases(c) -> np.ndarray:
    """Eigenvalue phases in (-pi, pi] of a (stack of) group element(s)."""
    lam = np.linalg.eigvals(np.asarray(c))
    return np.angle(lam)


def geodesic_distance(a, b):
    """Riemannian distance induced by the Hilbert-Schmidt inner product.

    Computed from the eigenvalue phases of ``b a^H``: ``sqrt(sum phase^2)``.
    For a real rotation the phases come in +-theta pairs, which gives the
    familiar ``sqrt(2 * sum(theta_k^2))`` over canonical angles.
    """
    a, b = _check_compatible(a, b)
    c = b @ np.conj(np.swapaxes(a, -1, -2))
    phases = eigen_phases(c)
    return np.sqrt(np.sum(phases**2, axis=-1))


def tangent_project(m) -> np.ndarray:
    """Orthogonal (Hilbert-Schmidt) projection onto skew / anti-Hermitian matrices."""
    m = np.asarray(m)
    if m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    return 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))


def skew_basis(k: int, l: int, n: int) -> np.ndarray:
    """Orthonormal basis element ``a_kl`` of the skew-symmetric matrices.

    ``a_kl e_k = e_l / sqrt(2)``, ``a_kl e_l = -e_k / sqrt(2)``.
    """
    _check_pair(k, l, n)
    a = np.zeros((n, n))
    a[l, k] = 1 / np.sqrt(2)
    a[k, l] = -1 / np.sqrt(2)
    return a


def basis_coefficient(h, k: int, l: int) -> float:
    """Coordinate ``<h, a_kl>_hs = sqrt(2) h[l, k]`` of a real skew matrix."""
    h = np.asarray(h)
    if np.iscomplexobj(h):
        raise ValueError("basis_coefficient expects a real skew-symmetric matrix")
    _check_pair(k, l, h.shape[-1])
    return np.sqrt(2) * h[..., l, k]


@dataclass(frozen=True)
class CanonicalAngles:
    """Block-rotation decomposition ``a = B diag(R(angles[0]), R(angles[1]), ...) B^T``.

    Column pairs ``(0, 1), (2, 3), ...`` of ``basis`` span the rotation
    planes; for odd n the last column is the fixed axis.
    """

    angles: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        n = self.basis.shape[0]
        core = np.eye(n)
        for k, theta in enumerate(self.angles):
            core[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = rotation_block(theta)
        return self.basis @ core @ self.basis.T


def canonical_angles(a, tol: float = 1e-8) -> CanonicalAngles:
    """Rotation angles of the 2x2 blocks in a real block-diagonalisation of ``a``.

    Uses the real Schur form, which is block diagonal for orthogonal input.
    Angles lie in (-pi, pi]; a pair of -1 eigenvalues becomes an angle of +pi.
    Sorted by decreasing magnitude.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if orthogonality_defect(a) > tol:
        raise GroupError("canonical_angles needs an orthogonal matrix")
    t, z = scipy.linalg.schur(a, output="real")
    # Off-block residue of the Schur form is pure rounding for normal input.
    planes = []  # (angle, col_a, col_b)
    plus, minus = [], []
    k = 0
    while k < n:
        if k + 1 < n and abs(t[k + 1, k]) > tol:
            theta = np.arctan2(t[k + 1, k], t[k, k])
            planes.append((theta, z[:, k], z[:, k + 1]))
            k += 2
        else:
            (plus if t[k, k] > 0 else minus).append(z[:, k])
            k += 1
    if len(minus) % 2:
        raise GroupError("odd number of -1 eigenvalues: determinant is not +1")
    for p in range(0, len(minus), 2):
        planes.append((np.pi, minus[p], minus[p + 1]))
    while len(planes) < n // 2:
        planes.append((0.0, plus.pop(), plus.pop()))
    planes.sort(key=lambda item: -abs(item[0]))
    cols = []
    for _, u, v in planes:
        cols.extend([u, v])
    cols.extend(plus)
    basis = np.column_stack(cols)
    angles = np.array([p[0] for p in planes])
    return CanonicalAngles(angles=angles, basis=basis)


def block_rotation(angles, n: int) -> np.ndarray:
    """Product of rotations by ``angles[k]`` in the planes (2k, 2k+1)."""
    angles = np.asarray(angles, dtype=float)
    if len(angles) > n // 2:
        raise ValueError(f"at most {n // 2} angles fit in dimension {n}")
    out = np.eye(n)
    for k, theta in enumerate(angles):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = rotation_block(theta)
    return out


def reorthonormalize(m, max_distance: float = 0.1) -> np.ndarray:
    """Nearest group element (polar factor), determinant fixed to +1 if real.

    Raises ``GroupError`` if ``m`` is farther than ``max_distance`` (in
    Hilbert-Schmidt norm) from its projection.
    """
    m = np.asarray(m)
    u, _, vh = np.linalg.svd(m)
    q = u @ vh
    if not np.iscomplexobj(m) and np.linalg.det(q) < 0:
        u[:, -1] *= -1
        q = u @ vh
    dist = float(hs_norm(m - q))
    if dist > max_distance:
        raise GroupError(f"matrix is {dist:.3g} away from the group (limit {max_distance})")
    return q


def unitary_exp_2x2(h) -> np.ndarray:
    """Closed-form exponential of a (stack of) 2x2 anti-Hermitian matrices.

    Writes ``h = i*(c*id + w.sigma)`` with Pauli matrices, so that
    ``exp(h) = e^{ic} (cos|w| id + i sin|w| (w.sigma)/|w|)``.
    """
    h = np.asarray(h, dtype=np.complex128)
    hh = -1j * h  # Hermitian
    c = 0.5 * (hh[..., 0, 0] + hh[..., 1, 1]).real
    wz = 0.5 * (hh[..., 0, 0] - hh[..., 1, 1]).real
    wx = hh[..., 1, 0].real
    wy = hh[..., 1, 0].imag
    w = np.sqrt(wx * wx + wy * wy + wz * wz)
    sinc = np.sinc(w / np.pi)  # sin(w)/w, stable at 0
    out = np.empty(h.shape, dtype=np.complex128)
    out[..., 0, 0] = np.cos(w) + 1j * sinc * wz
    out[..., 1, 1] = np.cos(w) - 1j * sinc * wz
    out[..., 0, 1] = 1j * sinc * (wx - 1j * wy)
    out[..., 1, 0] = 1j * sinc * (wx + 1j * wy)
    return np.exp(1j * c)[..., None, None] * out
