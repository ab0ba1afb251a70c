"""Generalized Vandermonde matrices, Gram matrices, Lagrange polynomials and
minimal-norm interpolation in a prescribed basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import AnalyticFunction, BasisSet, DimensionMismatch
from .linalg import LinAlgError, pseudoinverse, solve_hermitian


class RankDeficient(LinAlgError):
    """The nodes are degenerate for the basis: V_B(z) has rank < k."""

    def __init__(self, msg: str, block: int | None = None, rank: int | None = None):
        super().__init__(msg)
        self.block = block
        self.rank = rank


def as_nodes(z, n: int | None = None) -> np.ndarray:
    """Coerce a root tuple to a ``(k, n)`` complex array."""
    a = np.asarray(z, dtype=complex)
    if a.ndim == 1:
        a = a[:, np.newaxis] if n in (None, 1) else a.reshape(-1, n)
    if a.ndim != 2:
        raise DimensionMismatch(f"root tuple has shape {a.shape}")
    if n is not None and a.shape[1] != n:
        raise DimensionMismatch(f"nodes have {a.shape[1]} coordinates, expected {n}")
    return a


@dataclass(frozen=True)
class Vandermonde:
    matrix: np.ndarray  # (k, m), entry (i, j) = b_j(z_i)
    basis: BasisSet
    nodes: np.ndarray


def build_vandermonde(basis: BasisSet, z) -> Vandermonde:
    z = as_nodes(z, basis.nvars)
    k, m = z.shape[0], len(basis)
    if m < k:
        raise DimensionMismatch(f"basis has {m} elements but {k} nodes were given")
    v = np.array([basis.values(zi) for zi in z], dtype=complex).reshape(k, m)
    return Vandermonde(v, basis, z)


def gram_matrix(v) -> np.ndarray:
    """V V^*, the k x k Gram matrix of the node evaluations."""
    a = v.matrix if isinstance(v, Vandermonde) else np.asarray(v, dtype=complex)
    g = a @ a.conj().T
    return 0.5 * (g + g.conj().T)


def vandermonde_pinv(v, rank_tol: float | None = None) -> np.ndarray:
    a = v.matrix if isinstance(v, Vandermonde) else np.asarray(v, dtype=complex)
    pinv, rank = pseudoinverse(a, rank_tol)
    if rank < a.shape[0]:
        raise RankDeficient(f"Vandermonde matrix has numerical rank {rank} < {a.shape[0]}", rank=rank)
    return pinv


def lagrange_coefficients(v, rank_tol: float | None = None) -> np.ndarray:
    """(m, k) matrix whose column i holds the coefficients of L_{B,i}."""
    return vandermonde_pinv(v, rank_tol)


def lagrange_values(v: Vandermonde, x, rank_tol: float | None = None) -> np.ndarray:
    """L_{B,1..k}(z, x) at a single point ``x``."""
    return v.basis.values(x) @ lagrange_coefficients(v, rank_tol)


def min_norm_interpolant(f: AnalyticFunction, basis: BasisSet, z, rank_tol: float | None = None):
    """Coefficients (in ``basis``) of the minimal-norm element of span(B) that
    agrees with ``f`` at every node, and the interpolant itself."""
    v = build_vandermonde(basis, z)
    fv = np.array([f.value(zi) for zi in v.nodes], dtype=complex)
    coefs = vandermonde_pinv(v, rank_tol) @ fv
    return coefs, basis.combination(coefs)


def interpolant_norm_sq(f_values, gram) -> float:
    """f^* M^{-1} f, the squared norm of the minimal interpolant."""
    f = np.asarray(f_values, dtype=complex)
    if not np.any(f):
        return 0.0
    y = solve_hermitian(gram, f)
    return float(max(np.real(np.vdot(f, y)), 0.0))
