"""Iterations minimizing ‖W(z)‖² and the convergence controller driving them.

Four step functions share one signature-ish contract (take the system and
the current nodes, return new nodes):

* ``step_simplified_gn`` - node-wise update with the N x n Jacobian of the
  perturbed system; needs ``|B_t| == k``.
* ``step_standard_gn``   - Gauss-Newton for the Weierstrass map, through the
  normal equations ``sum_t D_t^* M_t^{-1} D_t``.
* ``step_quadratic``     - Newton step on ‖W‖² with an eigenvalue-repaired
  Hessian plus backtracking.
* ``step_conjugate_gradient`` - Polak-Ribiere directions and golden-section
  line minimization.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .functions import AnalyticFunction, SystemInstance
from .linalg import LinAlgError, SingularMatrix, eig_hermitian, pseudoinverse, solve_hermitian
from .weierstrass import (
    Counters,
    NodeData,
    _gradient_from,
    _jacobian_from,
    check_nodes,
    evaluate_nodes,
    objective_value,
    perturbed_system,
    real_gradient,
    real_hessian_from,
)

log = logging.getLogger(__name__)


class AssumptionViolated(ValueError):
    pass


class RankDeficientNodeJacobian(LinAlgError):
    def __init__(self, node: int, rank: int):
        super().__init__(f"Jacobian of the perturbed system at node {node} has rank {rank}")
        self.node = node
        self.rank = rank


class SingularNormalMatrix(LinAlgError):
    pass


class Method(str, enum.Enum):
    SIMPLIFIED_GN = "simplified-gn"
    STANDARD_GN = "standard-gn"
    QUADRATIC = "quadratic"
    CONJUGATE_GRADIENT = "conjugate-gradient"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def divergence_test(self) -> bool:
        return self in (Method.SIMPLIFIED_GN, Method.STANDARD_GN)


_LABELS = {
    Method.SIMPLIFIED_GN: "Simp G-N",
    Method.STANDARD_GN: "Std G-N",
    Method.QUADRATIC: "Quad It",
    Method.CONJUGATE_GRADIENT: "Conj Grd",
}


class Status(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_ITERATIONS = "max-iterations"
    FAILED = "failed"


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 128
    step_tol: float = 1e-3
    consecutive: int = 2
    divergence_window: int = 3
    beta: int = 40
    eig_floor: float = 1e-8
    shrink: float = 0.5
    max_halvings: int = 40

    def __post_init__(self):
        for name in ("max_iter", "consecutive", "divergence_window", "beta", "max_halvings"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.step_tol > 0 or not self.eig_floor > 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


# -- convergence controller ----------------------------------------------------

class ConvergenceMonitor:
    """Classifies a stream of step norms.

    Converged once ``consecutive`` successive steps are below ``step_tol``.
    With ``divergence_test`` on, ``divergence_window`` strictly increasing
    steps in a row mean Diverged. Running out of iterations is the caller's
    business.
    """

    def __init__(self, cfg: SolverConfig, divergence_test: bool):
        self.cfg = cfg
        self.divergence_test = divergence_test
        self.recent: deque[float] = deque(maxlen=max(cfg.consecutive, cfg.divergence_window))

    def update(self, step_norm: float) -> Status | None:
        self.recent.append(step_norm)
        tail = list(self.recent)
        c = self.cfg.consecutive
        if len(tail) >= c and all(s < self.cfg.step_tol for s in tail[-c:]):
            return Status.CONVERGED
        w = self.cfg.divergence_window
        if self.divergence_test and len(tail) >= w:
            last = tail[-w:]
            if all(a < b for a, b in zip(last, last[1:])):
                return Status.DIVERGED
        return None


def classify_steps(steps, cfg: SolverConfig = SolverConfig(), divergence_test: bool = True):
    """Run the controller over a synthetic step sequence.

    Returns ``(status, iterations)``; ``MAX_ITERATIONS`` when the sequence
    reaches ``cfg.max_iter`` without a verdict, ``None`` if it simply ends.
    """
    mon = ConvergenceMonitor(cfg, divergence_test)
    it = 0
    for it, s in enumerate(steps, 1):
        st = mon.update(s)
        if st is not None:
            return st, it
        if it >= cfg.max_iter:
            return Status.MAX_ITERATIONS, it
    return None, it


# -- state and results ---------------------------------------------------------

@dataclass
class SolverState:
    z: np.ndarray
    iteration: int = 0
    counters: Counters = field(default_factory=Counters)
    cg_direction: np.ndarray | None = None
    cg_gradient: np.ndarray | None = None
    cg_since_restart: int = 0
    stalled: bool = False
    last_model_step: float = 0.0


@dataclass
class SolverResult:
    method: Method
    status: Status
    z: np.ndarray
    objective: float
    perturbed: list[AnalyticFunction] | None
    trace: list[tuple[float, float]]
    counters: Counters
    iterations: int
    stalled: bool = False
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


# -- steps ---------------------------------------------------------------------

def _node_step(data: NodeData, counters: Counters | None) -> np.ndarray:
    k, n = data.k, data.n
    N = len(data.blocks)
    fv = np.array([b.fvals for b in data.blocks])          # (N, k)
    D = np.array([b.d for b in data.blocks])               # (N, k, n)
    dz = np.empty((k, n), dtype=complex)
    for i in range(k):
        pinv, rank = pseudoinverse(D[:, i, :])
        if rank < n:
            raise RankDeficientNodeJacobian(i, rank)
        dz[i] = pinv @ fv[:, i]
    if counters is not None:
        counters.arith_ops += k * N * n * n
    return dz


def step_simplified_gn(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    """``z_i <- z_i - J_z(z_i)^+ f(z_i)`` at every node.

    ``J_z`` is the N x n Jacobian of ``f - p`` where ``p`` are the current
    interpolants; requires every basis to have exactly k elements.
    """
    z = check_nodes(sys, z)
    bad = [t for t, b in enumerate(sys.bases) if len(b) != sys.k]
    if bad:
        raise AssumptionViolated(f"bases {bad} do not have exactly k={sys.k} elements")
    data = evaluate_nodes(sys, z, order=1, counters=counters)
    return z - _node_step(data, counters)


def normal_equations(data: NodeData) -> tuple[np.ndarray, np.ndarray]:
    """``sum_t D_t^* M_t^{-1} D_t`` and ``sum_t D_t^* M_t^{-1} f_t``."""
    k, n = data.k, data.n
    S = k * n
    A = np.zeros((S, S), dtype=complex)
    r = np.zeros(S, dtype=complex)
    rows = np.repeat(np.arange(k), n)
    cols = np.arange(S)
    for b in data.blocks:
        D = np.zeros((k, S), dtype=complex)
        D[rows, cols] = b.d.ravel()
        Q = b.pinv.conj().T @ b.pinv
        A += D.conj().T @ Q @ D
        r += D.conj().T @ b.G
    return 0.5 * (A + A.conj().T), r


def step_standard_gn(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    z = check_nodes(sys, z)
    data = evaluate_nodes(sys, z, order=1, counters=counters)
    A, r = normal_equations(data)
    if counters is not None:
        S = z.size
        counters.arith_ops += len(data.blocks) * S * S * data.k + S ** 3
    if not np.any(r):
        return z.copy()
    try:
        dz = solve_hermitian(A, r)
    except SingularMatrix as e:
        raise SingularNormalMatrix(str(e)) from e
    return z - dz.reshape(z.shape)


def step_standard_gn_pinv(sys: SystemInstance, z, counters: Counters | None = None) -> np.ndarray:
    """The same Gauss-Newton step computed as ``z - J^+ W``."""
    z = check_nodes(sys, z)
    data = evaluate_nodes(sys, z, order=1, counters=counters)
    J = _jacobian_from(data)
    W = np.concatenate([b.W for b in data.blocks])
    pinv, _ = pseudoinverse(J)
    return z - (pinv @ W).reshape(z.shape)


def _to_real(z: np.ndarray) -> np.ndarray:
    u = z.ravel()
    return np.concatenate([u.real, u.imag])


def _to_complex(x: np.ndarray, shape) -> np.ndarray:
    S = x.size // 2
    return (x[:S] + 1j * x[S:]).reshape(shape)


def _safe_objective(sys, z, counters) -> float:
    try:
        v = objective_value(sys, z, counters)
    except (LinAlgError, FloatingPointError, ValueError):
        return math.inf
    return v if math.isfinite(v) else math.inf


def quadratic_direction(H: np.ndarray, g: np.ndarray, eig_floor: float) -> np.ndarray:
    """Critical point of the quadratic model with eigenvalues forced positive."""
    lam, Q = eig_hermitian(H)
    Q = Q.real
    big = np.max(np.abs(lam)) if lam.size else 0.0
    if big == 0.0:
        return np.zeros_like(g)
    lam = np.maximum(np.abs(lam), eig_floor * big)
    return -(Q @ ((Q.T @ g) / lam))


def step_quadratic(sys: SystemInstance, z, cfg: SolverConfig = SolverConfig(),
                   counters: Counters | None = None, state: SolverState | None = None) -> np.ndarray:
    """Modified-Newton step on ‖W‖² with backtracking toward ``z``.

    Eigenvalues of the real Hessian are replaced by ``max(|l|, floor*max|l|)``.
    When no decrease is found within ``cfg.max_halvings`` halvings, ``z`` is
    returned unchanged and ``state.stalled`` is set.
    """
    z = check_nodes(sys, z)
    data = evaluate_nodes(sys, z, order=2, counters=counters)
    g = real_gradient(_gradient_from(data))
    if counters is not None:
        S = z.size
        counters.arith_ops += len(data.blocks) * data.k * (2 * S) ** 2 + (2 * S) ** 3
    if state is not None:
        state.stalled = False
        state.last_model_step = 0.0
    if not np.any(g):
        return z.copy()
    H = real_hessian_from(data)
    step = quadratic_direction(H, g, cfg.eig_floor)
    if state is not None:
        state.last_model_step = float(np.linalg.norm(step))
    phi0 = sum(float(np.vdot(b.W, b.W).real) for b in data.blocks)
    x0 = _to_real(z)
    t = 1.0
    for _ in range(cfg.max_halvings + 1):
        cand = _to_complex(x0 + t * step, z.shape)
        if _safe_objective(sys, cand, counters) <= phi0:
            return cand
        t *= cfg.shrink
    if state is not None:
        state.stalled = True
    return z.copy()


_GOLDEN = (math.sqrt(5) - 1) / 2


def line_minimize(phi: Callable[[float], float], beta: int, phi0: float | None = None,
                  max_expand: int = 60) -> float:
    """Minimize ``phi`` over ``t >= 0``.

    Brackets by doubling (or halving) from ``t = 1`` and refines by golden
    section until the bracket is within ``2**-beta`` of the abscissa.
    Returns 0 when no point improves on ``phi(0)``.
    """
    f0 = phi(0.0) if phi0 is None else phi0
    t, ft = 1.0, phi(1.0)
    if ft >= f0:
        for _ in range(max_expand):
            t *= 0.5
            ft = phi(t)
            if ft < f0:
                break
        else:
            return 0.0
        a, b, c = 0.0, t, 2 * t
    else:
        a, b = 0.0, t
        for _ in range(max_expand):
            c = 2 * b
            fc = phi(c)
            if fc >= ft:
                break
            a, b, ft = b, c, fc
        else:
            return b
    # golden section on [a, c] keeping the best point seen
    best_t, best_f = b, ft
    lo, hi = a, c
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = phi(x1), phi(x2)
    tol = 2.0 ** (-beta)
    while hi - lo > tol * max(abs(best_t), abs(lo) + abs(hi), 1e-300) * 0.5:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = phi(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = phi(x2)
        for xx, ff in ((x1, f1), (x2, f2)):
            if ff < best_f:
                best_t, best_f = xx, ff
        if hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi)):
            break
    return best_t


def step_conjugate_gradient(sys: SystemInstance, state: SolverState,
                            cfg: SolverConfig = SolverConfig(),
                            counters: Counters | None = None) -> np.ndarray:
    """One Polak-Ribiere step with restarts every 2nk iterations.

    Reads and updates the direction/gradient memory held in ``state``.
    """
    z = check_nodes(sys, state.z)
    data = evaluate_nodes(sys, z, order=1, counters=counters)
    g = real_gradient(_gradient_from(data))
    dim = g.size
    if counters is not None:
        counters.arith_ops += len(data.blocks) * data.k * dim
    if not np.any(g):
        state.cg_direction = None
        state.cg_gradient = None
        return z.copy()
    d = -g
    restarted = True
    prev_d, prev_g = state.cg_direction, state.cg_gradient
    if prev_d is not None and state.cg_since_restart < dim:
        beta_pr = float(g @ (g - prev_g)) / float(prev_g @ prev_g)
        if beta_pr > 0:
            cand = -g + beta_pr * prev_d
            if cand @ g < 0:
                d, restarted = cand, False
    state.cg_since_restart = 1 if restarted else state.cg_since_restart + 1
    state.cg_direction = d
    state.cg_gradient = g
    u = d / np.linalg.norm(d)
    x0 = _to_real(z)
    phi0 = sum(float(np.vdot(b.W, b.W).real) for b in data.blocks)
    t = line_minimize(lambda s: _safe_objective(sys, _to_complex(x0 + s * u, z.shape), counters),
                      cfg.beta, phi0)
    return _to_complex(x0 + t * u, z.shape)


# -- driver --------------------------------------------------------------------

def _step(method: Method, sys, state: SolverState, cfg: SolverConfig) -> np.ndarray:
    if method is Method.SIMPLIFIED_GN:
        return step_simplified_gn(sys, state.z, state.counters)
    if method is Method.STANDARD_GN:
        return step_standard_gn(sys, state.z, state.counters)
    if method is Method.QUADRATIC:
        return step_quadratic(sys, state.z, cfg, state.counters, state)
    return step_conjugate_gradient(sys, state, cfg, state.counters)


def run(method, sys: SystemInstance, z0, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Iterate ``method`` from ``z0`` under the step-norm convergence protocol."""
    method = Method(method)
    state = SolverState(check_nodes(sys, z0).copy())
    if method is Method.SIMPLIFIED_GN:
        bad = [t for t, b in enumerate(sys.bases) if len(b) != sys.k]
        if bad:
            raise AssumptionViolated(f"bases {bad} do not have exactly k={sys.k} elements")
    mon = ConvergenceMonitor(cfg, method.divergence_test)
    trace: list[tuple[float, float]] = []
    status = Status.MAX_ITERATIONS
    message = ""
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        for it in range(1, cfg.max_iter + 1):
            state.iteration = it
            try:
                z_new = _step(method, sys, state, cfg)
            except (LinAlgError, FloatingPointError, np.linalg.LinAlgError) as e:
                status, message = Status.FAILED, f"{type(e).__name__}: {e}"
                break
            if not np.all(np.isfinite(z_new)):
                status, message = Status.FAILED, "non-finite iterate"
                break
            step_norm = float(np.linalg.norm(z_new - state.z))
            if state.stalled:
                if state.last_model_step >= cfg.step_tol:
                    message = "backtracking found no decrease"
                    break
                step_norm = state.last_model_step
            state.z = z_new
            trace.append((_safe_objective(sys, z_new, None), step_norm))
            verdict = mon.update(step_norm)
            if verdict is not None:
                status = verdict
                break
    try:
        final = objective_value(sys, state.z)
        pert = perturbed_system(sys, state.z)
    except (LinAlgError, FloatingPointError, ValueError) as e:
        final, pert = math.inf, None
        if status is Status.CONVERGED:
            status, message = Status.FAILED, str(e)
    log.debug("%s: %s after %d iterations, objective %.3e", method.value, status.value,
              state.iteration, final)
    return SolverResult(method, status, state.z, final, pert, trace, state.counters,
                        state.iteration, state.stalled, message)
