"""Random problem generation, the four-method comparison and its tables.

Problems are built as in the published comparison: random dense polynomials
of degree <= D with coefficients in [-100, 100], made exactly consistent at k
random points by subtracting their minimal-norm interpolant, then perturbed
inside the span of the k smallest-degree monomials by coefficients drawn from
(-10**x, 10**x). Every random draw comes from its own Philox substream keyed by
(seed, config, x, trial, purpose, attempt).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .functions import (
    BasisSet,
    SparsePolynomial,
    SystemInstance,
    monomials_up_to_degree,
    smallest_degree_basis,
)
from .linalg import pseudoinverse
from .solvers import Method, SolverConfig, SolverResult, run
from .weierstrass import Counters, objective_value

EXPONENTS = (-2, -1, 0, 1, 2)
_PURPOSE = {"coefficients": 1, "points": 2, "perturbation": 3, "start": 4}


class GenerationDegenerate(RuntimeError):
    pass


class ScalingViolation(AssertionError):
    def __init__(self, method: str, counter: str, param: str, observed: float, predicted: float):
        super().__init__(
            f"{method}: {counter} grew by {observed:.3g} when doubling {param}, "
            f"expected about {predicted:.3g}")
        self.method, self.counter, self.param = method, counter, param
        self.observed, self.predicted = observed, predicted


@dataclass(frozen=True)
class ProblemConfig:
    N: int = 5
    n: int = 1
    D: int = 3
    k: int = 1
    x: int = 0
    trials: int = 10
    seed: int = 0
    complex_roots: bool = False
    start_radius: float = 1.0

    def __post_init__(self):
        if self.N <= self.n:
            raise ValueError(f"need N > n, got N={self.N}, n={self.n}")
        if self.k < 1 or self.trials < 1 or self.n < 1 or self.D < 0:
            raise ValueError("k, trials and n must be >= 1 and D >= 0")
        if len(monomials_up_to_degree(self.n, self.D)) < self.k:
            raise ValueError(f"degree {self.D} in {self.n} variables has fewer than k={self.k} monomials")

    @classmethod
    def from_json(cls, obj: dict) -> "ProblemConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown benchmark config fields: {sorted(extra)}")
        return cls(**obj)


@dataclass
class GeneratedProblem:
    unperturbed: list[SparsePolynomial]
    roots: np.ndarray
    system: SystemInstance
    start: np.ndarray
    perturbation_norm: float
    config: ProblemConfig
    trial: int


def _rng(cfg: ProblemConfig, trial: int, purpose: str, attempt: int) -> np.random.Generator:
    key = (cfg.N, cfg.n, cfg.D, cfg.k, cfg.x + 1000, trial, _PURPOSE[purpose], attempt,
           int(cfg.complex_roots))
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def unit_ball(rng: np.random.Generator, dim: int, radius: float = 1.0) -> np.ndarray:
    """Uniform sample from the ball of radius ``radius`` in R^dim."""
    g = rng.standard_normal(dim)
    return radius * g / np.linalg.norm(g) * rng.random() ** (1.0 / dim)


def generate_problem(cfg: ProblemConfig, trial: int, max_attempts: int = 100) -> GeneratedProblem:
    n, k = cfg.n, cfg.k
    full = BasisSet.from_exponents(monomials_up_to_degree(n, cfg.D))
    pert = smallest_degree_basis(n, k)
    for attempt in range(max_attempts):
        r = _rng(cfg, trial, "points", attempt)
        roots = r.uniform(-10, 10, size=(k, n)).astype(complex)
        if cfg.complex_roots:
            roots += 1j * r.uniform(-10, 10, size=(k, n))
        Vf = np.array([full.values(p) for p in roots])
        Vb = np.array([pert.values(p) for p in roots])
        pinv, rank = pseudoinverse(Vf)
        if rank < k or pseudoinverse(Vb).rank < k:
            continue
        break
    else:
        raise GenerationDegenerate(f"no nondegenerate points after {max_attempts} attempts")

    rc = _rng(cfg, trial, "coefficients", attempt)
    coefs = rc.uniform(-100, 100, size=(cfg.N, len(full)))
    unperturbed = []
    for c in coefs:
        vals = Vf @ c
        interp = pinv @ vals
        unperturbed.append(SparsePolynomial.from_coefficients(full.elements, c - interp))

    rp = _rng(cfg, trial, "perturbation", attempt)
    bound = 10.0 ** cfg.x
    rcoef = rp.uniform(-bound, bound, size=(cfg.N, k))
    inputs = [u + pert.combination(rr) for u, rr in zip(unperturbed, rcoef)]
    system = SystemInstance(tuple(inputs), (pert,) * cfg.N, k)

    rs = _rng(cfg, trial, "start", attempt)
    u = unit_ball(rs, 2 * n * k, cfg.start_radius)
    start = roots + (u[: n * k] + 1j * u[n * k:]).reshape(k, n)
    return GeneratedProblem(unperturbed, roots, system, start,
                            float(np.linalg.norm(rcoef)), cfg, trial)


# -- comparison ----------------------------------------------------------------

METHODS = (Method.SIMPLIFIED_GN, Method.STANDARD_GN, Method.QUADRATIC, Method.CONJUGATE_GRADIENT)


@dataclass
class Outcome:
    converged: bool
    residual: float
    output_norm: float
    iterations: int


def residual_norm(sys: SystemInstance, z) -> float:
    """2-norm of every input function at every node."""
    vals = [f.value(zi) for f in sys.functions for zi in np.atleast_2d(z)]
    return float(np.linalg.norm(vals))


def evaluate_outcome(sys: SystemInstance, res: SolverResult) -> Outcome:
    if not res.converged:
        return Outcome(False, math.nan, math.nan, res.iterations)
    try:
        out = math.sqrt(objective_value(sys, res.z))
    except (ArithmeticError, ValueError):
        return Outcome(False, math.nan, math.nan, res.iterations)
    return Outcome(True, residual_norm(sys, res.z), out, res.iterations)


def _solve_cell(args) -> list[Outcome]:
    cfg, trial, methods, solver_cfg = args
    prob = generate_problem(cfg, trial)
    out = []
    for m in methods:
        res = run(m, prob.system, prob.start, solver_cfg)
        out.append(evaluate_outcome(prob.system, res))
    return out


@dataclass
class ComparisonRow:
    method: str
    converged_pct: float
    rel_residual: tuple[float, float, float]
    abs_residual: tuple[float, float]
    rel_output: tuple[float, float, float]
    abs_output: tuple[float, float, float]
    iterations: float

    def values(self) -> list[float]:
        return [self.converged_pct, *self.rel_residual, *self.abs_residual,
                *self.rel_output, *self.abs_output, self.iterations]


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    common: int
    total: int
    outcomes: list[list[Outcome]] = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def row(self, method: Method) -> ComparisonRow:
        for r in self.rows:
            if r.method == method.label:
                return r
        raise KeyError(method)


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def _stats(xs: list[float]) -> tuple[float, float, float]:
    if not xs:
        return (math.nan, math.nan, math.nan)
    return (min(xs), math.fsum(xs) / len(xs), max(xs))


def aggregate(outcomes: list[list[Outcome]], methods=METHODS) -> Comparison:
    """Rows from per-problem outcomes (``outcomes[p][m]``).

    Relative metrics divide by the first method's value on the same problem;
    everything except the convergence rate uses only problems on which every
    method converged.
    """
    total = len(outcomes)
    common = [p for p in outcomes if all(o.converged for o in p)]
    rows = []
    for j, m in enumerate(methods):
        conv = sum(p[j].converged for p in outcomes)
        pct = 100.0 * conv / total if total else math.nan
        rr = [_ratio(p[j].residual, p[0].residual) for p in common]
        ro = [_ratio(p[j].output_norm, p[0].output_norm) for p in common]
        ar = [p[j].residual for p in common]
        ao = [p[j].output_norm for p in common]
        it = [p[j].iterations for p in common]
        amin, _, amax = _stats(ar)
        rows.append(ComparisonRow(
            Method(m).label, pct, _stats(rr), (amin, amax), _stats(ro), _stats(ao),
            math.fsum(it) / len(it) if it else math.nan))
    return Comparison(rows, len(common), total, outcomes)


def run_comparison(cfg: ProblemConfig, solver_cfg: SolverConfig = SolverConfig(),
                   exponents=EXPONENTS, jobs: int = 1, methods=METHODS) -> Comparison:
    cells = [(replace(cfg, x=x), t, tuple(methods), solver_cfg)
             for x in exponents for t in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_solve_cell, cells))
    else:
        outcomes = [_solve_cell(c) for c in cells]
    return aggregate(outcomes, methods)


# -- complexity ----------------------------------------------------------------

def predicted_order(method: Method, counter: str, N: int, n: int, k: int, beta: int) -> float:
    """Per-iteration orders from the complexity table (bases of size k)."""
    if method is Method.CONJUGATE_GRADIENT:
        width = n + beta
    elif method is Method.QUADRATIC:
        width = n * n
    else:
        width = n
    if counter == "input_evals":
        return N * k * width
    if counter == "basis_evals":
        return N * k * k * width
    if method is Method.SIMPLIFIED_GN:
        return max(N * k ** 3, N * k * n * n)
    if method is Method.CONJUGATE_GRADIENT:
        return N * k ** 3 * (n + beta)
    return N * k ** 3 * n * n


@dataclass(frozen=True)
class ScalingCheck:
    method: str
    counter: str
    param: str
    observed: float
    predicted: float

    @property
    def ok(self) -> bool:
        r = self.observed / self.predicted
        return 1 / 1.5 <= r <= 1.5


COMPLEXITY_GRID = (
    # (parameter doubled, base config, doubled config)
    ("k", ProblemConfig(N=5, n=2, D=3, k=4, x=-2, trials=1), ProblemConfig(N=5, n=2, D=3, k=8, x=-2, trials=1)),
    ("n", ProblemConfig(N=10, n=4, D=2, k=2, x=-2, trials=1), ProblemConfig(N=10, n=8, D=2, k=2, x=-2, trials=1)),
    ("N", ProblemConfig(N=5, n=2, D=2, k=2, x=-2, trials=1), ProblemConfig(N=10, n=2, D=2, k=2, x=-2, trials=1)),
)

COUNTERS = ("input_evals", "basis_evals", "arith_ops")


def single_step_counters(method: Method, cfg: ProblemConfig, solver_cfg: SolverConfig,
                         trial: int = 0, start_radius: float = 1e-3) -> Counters:
    prob = generate_problem(replace(cfg, start_radius=start_radius), trial)
    res = run(method, prob.system, prob.start, replace(solver_cfg, max_iter=1))
    return res.counters


def verify_complexity(grid=COMPLEXITY_GRID, solver_cfg: SolverConfig = SolverConfig(),
                      methods=METHODS, counters=COUNTERS, trials: int = 3,
                      raise_on_violation: bool = True) -> list[ScalingCheck]:
    """Compare counter growth under parameter doubling with the predicted orders.

    Counts are averaged over ``trials`` problems per configuration and taken
    from a single iteration started near the true roots.
    """
    checks = []
    for param, base, doubled in grid:
        for m in methods:
            m = Method(m)
            c0 = [single_step_counters(m, base, solver_cfg, t) for t in range(trials)]
            c1 = [single_step_counters(m, doubled, solver_cfg, t) for t in range(trials)]
            for name in counters:
                a = math.fsum(getattr(c, name) for c in c0)
                b = math.fsum(getattr(c, name) for c in c1)
                p0 = predicted_order(m, name, base.N, base.n, base.k, solver_cfg.beta)
                p1 = predicted_order(m, name, doubled.N, doubled.n, doubled.k, solver_cfg.beta)
                chk = ScalingCheck(m.label, name, param, b / a, p1 / p0)
                checks.append(chk)
                if raise_on_violation and not chk.ok:
                    raise ScalingViolation(m.label, name, param, chk.observed, chk.predicted)
    return checks


# -- tables --------------------------------------------------------------------

HEADERS = [
    "Method", "% Converged",
    "Rel Residual Min", "Rel Residual Avg", "Rel Residual Max",
    "Abs Resid Min", "Abs Resid Max",
    "Rel Output Norm Min", "Rel Output Norm Avg", "Rel Output Norm Max",
    "Abs Output Norm Min", "Abs Output Norm Avg", "Abs Output Norm Max",
    "Iter Cnt",
]


def fmt(v: float) -> str:
    """Three significant digits; compact scientific notation below 1e-3 or from 1e3."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0:
        return "0"
    a = abs(v)
    if a < 1e-3 or a >= 999.5:
        mant, exp = f"{v:.2e}".split("e")
        return f"{mant}e{int(exp)}"
    s = f"{v:#.3g}"
    return s.rstrip(".")


def emit_table(rows, format: str = "markdown", footer: str | None = None) -> str:
    """Render comparison rows as ``markdown`` or ``csv``.

    CSV cells carry full precision (``repr``) so they parse back exactly;
    markdown cells use :func:`fmt`.
    """
    rows = list(rows)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADERS)
        for r in rows:
            w.writerow([r.method, *(repr(float(v)) for v in r.values())])
        return buf.getvalue()
    if format != "markdown":
        raise ValueError(f"unknown table format {format!r}")
    lines = ["| " + " | ".join(HEADERS) + " |",
             "|" + "|".join(["---"] + ["---:"] * (len(HEADERS) - 1)) + "|"]
    for r in rows:
        lines.append("| " + " | ".join([r.method, *(fmt(v) for v in r.values())]) + " |")
    out = "\n".join(lines) + "\n"
    if footer:
        out += "\n" + footer + "\n"
    return out


def parse_csv_table(text: str) -> list[ComparisonRow]:
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if header != HEADERS:
        raise ValueError("unexpected CSV header")
    out = []
    for rec in rd:
        v = [float(x) for x in rec[1:]]
        out.append(ComparisonRow(rec[0], v[0], tuple(v[1:4]), tuple(v[4:6]),
                                 tuple(v[6:9]), tuple(v[9:12]), v[12]))
    return out


def footer_line(cmp: Comparison) -> str:
    return f"problems for which all methods converged: {cmp.common}"
