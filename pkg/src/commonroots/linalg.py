"""Dense complex linear algebra used by the interpolation and solver code.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The helpers
here add the numerical-rank bookkeeping the rest of the package relies on
(rank-deficient Vandermonde matrices signal coincident nodes).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

EPS = np.finfo(float).eps


class LinAlgError(ArithmeticError):
    """Base class for numerical failures raised by this package."""


class SingularMatrix(LinAlgError):
    pass


class NotHermitian(LinAlgError):
    pass


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array, rejecting NaN/Inf entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


class Svd(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    rank: int


def default_rank_tol(shape) -> float:
    return max(shape) * EPS


def svd(m, rank_tol: float | None = None) -> Svd:
    """Thin SVD with numerical rank: singular values above ``rank_tol * s_max`` count."""
    a = as_matrix(m)
    if rank_tol is None:
        rank_tol = default_rank_tol(a.shape)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rank_tol * smax)) if smax > 0 else 0
    return Svd(u, s, vh, rank)


class PseudoInverse(NamedTuple):
    matrix: np.ndarray
    rank: int


def pseudoinverse(m, rank_tol: float | None = None) -> PseudoInverse:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``rank_tol * sigma_max`` are treated as zero.
    Returns the pseudoinverse together with the effective rank.
    """
    a = as_matrix(m)
    if a.size == 0:
        raise ValueError("empty matrix")
    if rank_tol is not None and rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    f = svd(a, rank_tol)
    r = f.rank
    inv_s = 1.0 / f.s[:r]
    pinv = (f.vh[:r].conj().T * inv_s) @ f.u[:, :r].conj().T
    return PseudoInverse(pinv, r)


def _hermitian_defect(a: np.ndarray) -> float:
    scale = np.linalg.norm(a)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / scale)


def solve_hermitian(m, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` for Hermitian ``m``.

    Tries Cholesky first and falls back to a Bunch-Kaufman LDL* factorization.
    Raises :class:`SingularMatrix` when ``m`` is numerically rank deficient.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != n:
        raise ValueError(f"rhs has length {b.shape[0]}, expected {n}")
    scale = np.max(np.abs(np.diag(a))) if n else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    floor = n * EPS * scale
    try:
        c = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        c = None
    if c is not None:
        d = np.abs(np.diag(c[0])) ** 2
        if d.min() > floor:
            return scipy.linalg.cho_solve(c, b, check_finite=False)
    lu, dmat, perm = scipy.linalg.ldl(a, lower=True, hermitian=True, check_finite=False)
    evals = np.linalg.eigvalsh(dmat)
    if np.min(np.abs(evals)) <= floor:
        raise SingularMatrix(
            f"numerical rank {int(np.count_nonzero(np.abs(evals) > floor))} < {n}"
        )
    # a = lu d lu^*, with lu[perm] lower triangular
    y = scipy.linalg.solve_triangular(lu[perm], b[perm], lower=True, check_finite=False)
    y = np.linalg.solve(dmat, y)
    x = np.empty_like(y)
    x[perm] = scipy.linalg.solve_triangular(
        lu[perm].conj().T, y, lower=False, check_finite=False
    )
    return x


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if _hermitian_defect(a) > 1e-12:
        raise NotHermitian(f"relative Hermitian defect {_hermitian_defect(a):.3e}")
    if np.all(a.imag == 0):
        w, q = np.linalg.eigh(a.real)
        return w, q.astype(complex)
    return np.linalg.eigh(a)
