import math

import numpy as np
import pytest

from commonroots import bench
from commonroots.bench import (
    ComparisonRow,
    Outcome,
    ProblemConfig,
    ScalingViolation,
    aggregate,
    evaluate_outcome,
    emit_table,
    fmt,
    generate_problem,
    parse_csv_table,
    run_comparison,
    unit_ball,
    verify_complexity,
)
from commonroots.interpolation import build_vandermonde
from commonroots.solvers import Method, SolverConfig, SolverResult, Status
from commonroots.weierstrass import Counters


def _same_problem(a, b):
    assert np.array_equal(a.roots, b.roots)
    assert np.array_equal(a.start, b.start)
    assert a.unperturbed == b.unperturbed
    assert a.system.functions == b.system.functions


def test_generation_is_deterministic():
    cfg = ProblemConfig(N=5, n=2, D=2, k=2, x=-1, seed=42)
    _same_problem(generate_problem(cfg, 3), generate_problem(cfg, 3))
    other = generate_problem(cfg, 4)
    assert not np.array_equal(other.roots, generate_problem(cfg, 3).roots)


@pytest.mark.parametrize("cfg", [
    ProblemConfig(N=5, n=1, D=3, k=1, x=-2),
    ProblemConfig(N=5, n=2, D=2, k=2, x=-2),
    ProblemConfig(N=4, n=2, D=3, k=4, x=-2),
])
def test_generated_problem_invariants(cfg):
    for trial in range(5):
        p = generate_problem(cfg, trial)
        scale = 1 + max(max(abs(c) for c in u.terms.values()) for u in p.unperturbed)
        for u in p.unperturbed:
            for r in p.roots:
                assert abs(u.value(r)) <= 1e-8 * scale
        assert np.all(np.abs(p.roots.real) < 10) and np.all(p.roots.imag == 0)
        pert = p.system.bases[0]
        for f, u in zip(p.system.functions, p.unperturbed):
            d = f - u
            # the difference lives in span(B) and has coefficients below 10^x
            assert set(d.terms) <= {tuple(e) for e in pert.exponents}
            norm = math.sqrt(sum(abs(c) ** 2 for c in d.terms.values()))
            assert norm <= math.sqrt(cfg.k) * 1e-2
        disp = np.concatenate([(p.start - p.roots).real.ravel(), (p.start - p.roots).imag.ravel()])
        assert np.linalg.norm(disp) <= 1.0
        assert np.linalg.matrix_rank(build_vandermonde(pert, p.roots).matrix) == cfg.k


def test_unit_ball_samples_inside():
    rng = np.random.default_rng(0)
    pts = np.array([unit_ball(rng, 4, 2.0) for _ in range(500)])
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 2.0
    # uniform in the 4-ball: P(r < 1) = (1/2)^4
    assert 0.02 < np.mean(r < 1.0) < 0.12


def test_problem_config_validation():
    with pytest.raises(ValueError):
        ProblemConfig(N=2, n=2)
    with pytest.raises(ValueError):
        ProblemConfig(k=0)
    with pytest.raises(ValueError):
        ProblemConfig(n=1, D=1, k=3)
    with pytest.raises(ValueError):
        ProblemConfig.from_json({"N": 5, "bogus": 1})
    assert ProblemConfig.from_json({"N": 6, "n": 2, "D": 2, "k": 2, "trials": 3, "seed": 9}).N == 6


def _o(res, out, it=3, ok=True):
    return Outcome(ok, res, out, it)


def test_aggregate_common_convergence_filtering():
    outcomes = [
        [_o(1.0, 2.0), _o(2.0, 1.0), _o(1.0, 2.0), _o(3.0, 4.0)],
        [_o(4.0, 4.0), _o(4.0, 2.0), _o(2.0, 4.0), _o(4.0, 4.0, ok=False)],
    ]
    cmp = aggregate(outcomes)
    assert len(cmp) == 4 and cmp.common == 1 and cmp.total == 2
    simp, std, quad, cg = cmp.rows
    assert simp.converged_pct == 100 and cg.converged_pct == 50
    assert simp.rel_residual == (1.0, 1.0, 1.0) and simp.rel_output == (1.0, 1.0, 1.0)
    assert std.rel_residual == (2.0, 2.0, 2.0) and std.rel_output == (0.5, 0.5, 0.5)
    assert cg.abs_residual == (3.0, 3.0)
    assert [r.method for r in cmp.rows] == ["Simp G-N", "Std G-N", "Quad It", "Conj Grd"]


def test_aggregate_zero_reference_residual():
    cmp = aggregate([[_o(0.0, 0.0), _o(0.0, 0.0), _o(0.0, 0.0), _o(0.0, 0.0)]])
    assert all(r.rel_residual == (1.0, 1.0, 1.0) for r in cmp)


def test_empty_aggregate_and_table():
    cmp = aggregate([])
    assert cmp.common == 0 and all(math.isnan(r.converged_pct) for r in cmp)
    text = emit_table([], "markdown")
    assert text.count("\n") == 2 and text.startswith("| Method |")
    csv_text = emit_table([], "csv")
    assert len(csv_text.splitlines()) == 1
    assert parse_csv_table(csv_text) == []


def test_small_comparison_rows_and_determinism():
    cfg = ProblemConfig(N=5, n=1, D=3, k=1, trials=1, seed=5)
    a = run_comparison(cfg, exponents=(-2, 0))
    b = run_comparison(cfg, exponents=(-2, 0))
    assert len(a) == 4 and a.total == 2
    assert emit_table(a, "csv") == emit_table(b, "csv")
    simp = a.row(Method.SIMPLIFIED_GN)
    if a.common:
        assert simp.rel_residual == (1.0, 1.0, 1.0) and simp.rel_output == (1.0, 1.0, 1.0)


def test_parallel_matches_serial():
    cfg = ProblemConfig(N=5, n=1, D=3, k=1, trials=1, seed=11)
    a = run_comparison(cfg, exponents=(-1, 1))
    b = run_comparison(cfg, exponents=(-1, 1), jobs=2)
    assert emit_table(a, "csv") == emit_table(b, "csv")


def test_exact_roots_give_zero_residual_and_unit_ratio():
    # every method "returns" the true roots of a nearly consistent problem
    cfg = ProblemConfig(N=5, n=1, D=3, k=1, x=-12, seed=3)
    outcomes = []
    for trial in range(3):
        p = generate_problem(cfg, trial)
        res = SolverResult(Method.STANDARD_GN, Status.CONVERGED, p.roots, 0.0, None, [], Counters(), 1)
        outcomes.append([evaluate_outcome(p.system, res)] * 4)
    cmp = aggregate(outcomes)
    for r in cmp:
        assert r.abs_residual[1] <= 1e-8
        assert r.rel_output == (1.0, 1.0, 1.0)


def test_csv_round_trip():
    row = ComparisonRow("Std G-N", 96.0, (0.12, 1.16, 3.3), (4.7e-7, 123.0),
                        (0.5, 0.88, 1.0), (1e-4, 2.5, 1e3), 5.04)
    back = parse_csv_table(emit_table([row], "csv"))
    assert back == [row]


def test_markdown_layout():
    row = ComparisonRow("Quad It", 100.0, (1.0, 1.0, 1.0), (4.7e-7, 12.3),
                        (1.0, 1.0, 1.0), (0.001, 0.5, 1350.0), 4.2)
    text = emit_table([row], "markdown", footer="problems for which all methods converged: 1")
    lines = text.splitlines()
    cells = [c.strip() for c in lines[2].strip("|").split("|")]
    assert len(cells) == 14 and len(cells[1:]) == 13
    assert cells[0] == "Quad It" and "4.70e-7" in cells and "1.35e3" in cells
    assert lines[-1] == "problems for which all methods converged: 1"


@pytest.mark.parametrize("v,s", [(1.0, "1.00"), (0.88, "0.880"), (4.7e-7, "4.70e-7"), (123.456, "123"),
                                 (0.0, "0"), (1350.0, "1.35e3"), (0.001, "0.00100"), (math.nan, "nan")])
def test_fmt(v, s):
    assert fmt(v) == s


def test_verify_complexity_empty_grid():
    assert verify_complexity(grid=()) == []


def test_verify_complexity_raises_on_violation(monkeypatch):
    monkeypatch.setattr(bench, "predicted_order", lambda m, c, N, n, k, beta: 1.0 if k < 3 else 10.0)
    grid = ("k", ProblemConfig(N=5, n=2, D=2, k=2, x=-2, trials=1),
            ProblemConfig(N=5, n=2, D=2, k=4, x=-2, trials=1))
    with pytest.raises(ScalingViolation) as ei:
        verify_complexity(grid=(grid,), methods=[Method.STANDARD_GN], trials=1)
    assert ei.value.counter == "input_evals" and ei.value.param == "k"


def test_gn_input_evaluations_exact():
    # one G-N iteration: N k (1 + n) evaluations for the step
    cfg = ProblemConfig(N=5, n=2, D=2, k=2, x=-2)
    c = bench.single_step_counters(Method.STANDARD_GN, cfg, SolverConfig())
    c2 = bench.single_step_counters(Method.STANDARD_GN, ProblemConfig(N=5, n=2, D=3, k=4, x=-2), SolverConfig())
    assert c2.input_evals == 2 * c.input_evals
    assert c2.basis_evals == 4 * c.basis_evals
