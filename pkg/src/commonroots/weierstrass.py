"""The generalized Weierstrass map and the distance objective built on it.

For a system ``f_1..f_N`` with bases ``B_1..B_N`` and a root tuple
``z = (z_1..z_k)``, block ``t`` of the map is the coefficient vector of the
minimal-norm element of span(B_t) interpolating ``f_t`` at the nodes. Its
squared norm is the squared distance from the input to the nearest system
having ``z`` as common roots.

Derivatives are holomorphic (Wirtinger) derivatives in ``z``; the conjugate
half follows from ``‖W‖²`` being real. Real-coordinate vectors are ordered
``[Re z.ravel(), Im z.ravel()]`` with ``z.ravel()`` node-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import AnalyticFunction, SystemInstance
from .interpolation import RankDeficient, as_nodes
from .linalg import SingularMatrix, pseudoinverse, solve_hermitian


@dataclass
class Counters:
    """Evaluation counts in the categories of the complexity table."""

    input_evals: int = 0
    basis_evals: int = 0
    arith_ops: int = 0

    def __iadd__(self, other: "Counters"):
        self.input_evals += other.input_evals
        self.basis_evals += other.basis_evals
        self.arith_ops += other.arith_ops
        return self

    def copy(self) -> "Counters":
        return Counters(self.input_evals, self.basis_evals, self.arith_ops)

    def as_dict(self) -> dict:
        return {"input_evals": self.input_evals, "basis_evals": self.basis_evals,
                "arith_ops": self.arith_ops}


@dataclass
class Block:
    """Per-function data at the current nodes."""

    fvals: np.ndarray            # (k,)
    V: np.ndarray                # (k, m)
    pinv: np.ndarray             # (m, k)
    W: np.ndarray                # (m,) coefficients of p_t
    G: np.ndarray                # (k,) M^{-1} f
    fgrad: np.ndarray | None = None   # (k, n)
    fhess: np.ndarray | None = None   # (k, n, n)
    Vd: np.ndarray | None = None      # (k, m, n)
    Vdd: np.ndarray | None = None     # (k, m, n, n)
    d: np.ndarray | None = None       # (k, n): d(f_t - p_t)/dx_j at z_i


@dataclass
class NodeData:
    z: np.ndarray
    blocks: list[Block]
    order: int

    @property
    def k(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]


def check_nodes(sys: SystemInstance, z) -> np.ndarray:
    z = as_nodes(z, sys.nvars)
    if z.shape[0] != sys.k:
        raise ValueError(f"expected {sys.k} nodes, got {z.shape[0]}")
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite node coordinates")
    return z


def evaluate_nodes(sys: SystemInstance, z, order: int = 1,
                   counters: Counters | None = None) -> NodeData:
    """Evaluate inputs and bases (with derivatives up to ``order``) at the nodes."""
    z = check_nodes(sys, z)
    k, n = z.shape
    c = counters if counters is not None else Counters()
    per_point = 1 + (n if order >= 1 else 0) + (n * n if order >= 2 else 0)
    blocks = []
    for t, (f, basis) in enumerate(zip(sys.functions, sys.bases)):
        m = len(basis)
        if m < k:
            raise RankDeficient(f"basis {t} has {m} < k={k} elements", block=t, rank=m)
        fvals = np.array([f.value(zi) for zi in z], dtype=complex)
        V = np.array([basis.values(zi) for zi in z], dtype=complex)
        c.input_evals += k * per_point
        c.basis_evals += k * m * per_point
        pinv, rank = pseudoinverse(V)
        if rank < k:
            raise RankDeficient(
                f"nodes are degenerate for basis {t}: rank {rank} < {k}", block=t, rank=rank)
        W = pinv @ fvals
        G = pinv.conj().T @ W  # (V^+)^* V^+ = (V V^*)^{-1}
        c.arith_ops += k * k * m + k * m
        b = Block(fvals, V, pinv, W, G)
        if order >= 1:
            b.fgrad = np.array([f.gradient(zi) for zi in z], dtype=complex).reshape(k, n)
            b.Vd = np.array([basis.gradients(zi) for zi in z], dtype=complex).reshape(k, m, n)
            b.d = b.fgrad - np.einsum("imj,m->ij", b.Vd, W)
            c.arith_ops += k * m * n
        if order >= 2:
            b.fhess = np.array([f.hessian(zi) for zi in z], dtype=complex).reshape(k, n, n)
            b.Vdd = np.array([basis.hessians(zi) for zi in z], dtype=complex).reshape(k, m, n, n)
        blocks.append(b)
    return NodeData(z, blocks, order)


# -- map and objective --------------------------------------------------------

@dataclass(frozen=True)
class WeierstrassValue:
    blocks: tuple[np.ndarray, ...]

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def norm_sq(self) -> float:
        return float(sum(np.vdot(b, b).real for b in self.blocks))


@dataclass(frozen=True)
class ObjectiveEvaluation:
    value: float
    residual: np.ndarray          # (N*k,) f_t(z_i), function-major
    per_function: np.ndarray      # (N,)


def weierstrass_map(sys: SystemInstance, z, counters: Counters | None = None) -> WeierstrassValue:
    data = evaluate_nodes(sys, z, order=0, counters=counters)
    return WeierstrassValue(tuple(b.W for b in data.blocks))


def objective(sys: SystemInstance, z, counters: Counters | None = None) -> ObjectiveEvaluation:
    """Squared distance ``sum_t f_t^* M_t^{-1} f_t`` via Gram-matrix solves."""
    z = check_nodes(sys, z)
    k, n = z.shape
    c = counters if counters is not None else Counters()
    per = np.empty(sys.N)
    resid = []
    for t, (f, basis) in enumerate(zip(sys.functions, sys.bases)):
        fv = np.array([f.value(zi) for zi in z], dtype=complex)
        V = np.array([basis.values(zi) for zi in z], dtype=complex)
        c.input_evals += k
        c.basis_evals += k * len(basis)
        c.arith_ops += k * k * len(basis) + k ** 3
        resid.append(fv)
        if not np.any(fv):
            per[t] = 0.0
            continue
        M = V @ V.conj().T
        try:
            y = solve_hermitian(0.5 * (M + M.conj().T), fv)
        except SingularMatrix as e:
            raise RankDeficient(f"nodes are degenerate for basis {t}: {e}", block=t) from e
        per[t] = max(float(np.vdot(fv, y).real), 0.0)
    return ObjectiveEvaluation(float(per.sum()), np.concatenate(resid), per)


def objective_value(sys: SystemInstance, z, counters: Counters | None = None) -> float:
    return objective(sys, z, counters).value


# -- derivatives --------------------------------------------------------------

def _jacobian_from(data: NodeData) -> np.ndarray:
    k, n = data.k, data.n
    cols = []
    for b in data.blocks:
        # column (i, j) is pinv[:, i] * d[i, j]
        cols.append((b.pinv[:, :, np.newaxis] * b.d[np.newaxis, :, :]).reshape(-1, k * n))
    return np.vstack(cols)


def jacobian(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    """Holomorphic Jacobian of the stacked map, shape (sum m_t, n*k).

    Column ``i*n + j`` is the derivative with respect to coordinate ``j`` of
    node ``i``. Only row ``i`` of dV/dz_{ij} is nonzero, so each block is
    ``V_t^+`` times a single scaled unit vector.
    """
    return _jacobian_from(evaluate_nodes(sys, z, order=1, counters=counters))


def _gradient_from(data: NodeData) -> np.ndarray:
    g = np.zeros((data.k, data.n), dtype=complex)
    for b in data.blocks:
        g += np.conj(b.G)[:, np.newaxis] * b.d
    return g.ravel()


def gradient_of_objective(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    """d‖W‖²/dz (holomorphic), equal to ``W^* J``; length n*k."""
    return _gradient_from(evaluate_nodes(sys, z, order=1, counters=counters))


def real_gradient(c: np.ndarray) -> np.ndarray:
    """Gradient in ``[Re, Im]`` coordinates from the holomorphic derivative."""
    return np.concatenate([2 * c.real, -2 * c.imag])


def _complex_hessians(data: NodeData) -> tuple[np.ndarray, np.ndarray]:
    """A = d²φ/dz dz^T and B = d²φ/dz dz̄^T for φ = ‖W‖²."""
    k, n = data.k, data.n
    S = k * n
    node = np.repeat(np.arange(k), n)
    var = np.tile(np.arange(n), k)
    A = np.zeros((S, S), dtype=complex)
    B = np.zeros((S, S), dtype=complex)
    for b in data.blocks:
        m = b.V.shape[1]
        d = b.d.ravel()
        Gc = np.conj(b.G)
        Q = b.pinv.conj().T @ b.pinv                       # M^{-1}
        Vd = b.Vd.transpose(0, 2, 1).reshape(S, m)          # row a: d b(z_i)/dx_j
        X = (Vd @ b.V.conj().T) @ Q                         # (S, k)
        T1 = d[:, np.newaxis] * Gc[node][np.newaxis, :] * X[:, node].T
        second = np.einsum("ijl,i->ijl", b.fhess - np.einsum("imjl,m->ijl", b.Vdd, b.W), Gc)
        Ad = np.zeros((S, S), dtype=complex)
        for i in range(k):
            s = slice(i * n, (i + 1) * n)
            Ad[s, s] = second[i]
        A += Ad - T1 - T1.T
        P = np.eye(m) - b.pinv @ b.V
        Y = Gc[node][:, np.newaxis] * Vd
        B += d[:, np.newaxis] * np.conj(Q[np.ix_(node, node)]) * np.conj(d)[np.newaxis, :]
        B -= Y @ P @ Y.conj().T
    return A, B


def real_hessian_from(data: NodeData) -> np.ndarray:
    A, B = _complex_hessians(data)
    hxx = 2 * A.real + 2 * B.real
    hxy = -2 * A.imag + 2 * B.imag
    hyy = -2 * A.real + 2 * B.real
    H = np.block([[hxx, hxy], [hxy.T, hyy]])
    return 0.5 * (H + H.T)


def real_hessian(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    """Hessian of ‖W‖² in ``[Re, Im]`` coordinates, shape (2nk, 2nk)."""
    return real_hessian_from(evaluate_nodes(sys, z, order=2, counters=counters))


def perturbations(sys: SystemInstance, z) -> list[AnalyticFunction]:
    data = evaluate_nodes(sys, z, order=0)
    return [basis.combination(b.W) for basis, b in zip(sys.bases, data.blocks)]


def perturbed_system(sys: SystemInstance, z) -> list[AnalyticFunction]:
    """``f_t - p_t``: the nearest system having the nodes as common roots."""
    return [f - p for f, p in zip(sys.functions, perturbations(sys, z))]
