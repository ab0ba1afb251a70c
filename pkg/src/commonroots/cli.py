"""Command-line entry point.

Exit status: 0 when every requested run converged, 2 on numerical
non-convergence (diverged, iteration cap, rank failure), 1 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .functions import SystemInstance, load_system
from .solvers import Method, SolverConfig, SolverResult, Status, run
from .weierstrass import perturbations

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(Exception):
    pass


def _read_json(src: str, what: str):
    text = src if src.lstrip().startswith("{") else None
    if text is None:
        try:
            text = Path(src).read_text()
        except OSError as e:
            raise InputError(f"cannot read {what} {src!r}: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"malformed JSON in {what} at line {e.lineno}, column {e.colno}: {e.msg}") from e


def _parse_point(p) -> complex:
    if isinstance(p, dict):
        return complex(p.get("re", 0.0), p.get("im", 0.0))
    if isinstance(p, (list, tuple)):
        return complex(p[0], p[1] if len(p) > 1 else 0.0)
    return complex(p)


def parse_roots(obj, k: int, n: int) -> np.ndarray:
    """Nodes from JSON: k lists of n coordinates ({re, im}, [re, im] or a number)."""
    try:
        z = np.array([[_parse_point(c) for c in (node if isinstance(node, list) else [node])]
                      for node in obj], dtype=complex)
    except (TypeError, ValueError, IndexError) as e:
        raise InputError(f"cannot parse roots: {e}") from e
    if z.shape != (k, n):
        raise InputError(f"roots have shape {z.shape}, expected ({k}, {n})")
    return z


def roots_json(z: np.ndarray) -> list:
    return [[{"re": float(c.real), "im": float(c.imag)} for c in node] for node in z]


def _guess_from(obj) -> object:
    if "roots" in obj:
        return obj["roots"]
    if "initial_guess" in obj:
        return obj["initial_guess"]
    if obj.get("results"):
        return obj["results"][0]["roots"]
    raise InputError("guess file has no 'roots' field")


def initial_guess(args, sys_obj: dict, system: SystemInstance) -> np.ndarray:
    k, n = system.k, system.nvars
    if args.guess:
        return parse_roots(_guess_from(_read_json(args.guess, "guess file")), k, n)
    center = (parse_roots(sys_obj["initial_guess"], k, n) if "initial_guess" in sys_obj
              else np.zeros((k, n), dtype=complex))
    if args.random_near is not None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
        u = bench.unit_ball(rng, 2 * n * k, args.random_near)
        return center + (u[: n * k] + 1j * u[n * k:]).reshape(k, n)
    if "initial_guess" in sys_obj:
        return center
    raise InputError("no initial guess: pass --guess, --random-near or put 'initial_guess' in the system")


def solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(max_iter=args.max_iter, step_tol=args.step_tol, beta=args.beta)
    except ValueError as e:
        raise InputError(str(e)) from e


def result_json(system: SystemInstance, res: SolverResult) -> dict:
    out = {
        "method": res.method.value,
        "status": res.status.value,
        "iterations": res.iterations,
        "objective": res.objective,
        "roots": roots_json(res.z),
        "counters": res.counters.as_dict(),
        "stalled": res.stalled,
        "message": res.message,
    }
    if res.perturbed is not None:
        out["perturbations"] = [p.to_json() for p in perturbations(system, res.z)]
        out["perturbed_system"] = [f.to_json() for f in res.perturbed]
    return out


def _render_solve(blocks: list[dict], fmt: str) -> str:
    if fmt == "json":
        body = blocks[0] if len(blocks) == 1 else {"results": blocks}
        return json.dumps(body, indent=2) + "\n"
    if fmt == "csv":
        lines = ["method,status,iterations,objective,node,variable,re,im"]
        for b in blocks:
            for i, node in enumerate(b["roots"]):
                for j, c in enumerate(node):
                    lines.append(f"{b['method']},{b['status']},{b['iterations']},"
                                 f"{b['objective']!r},{i},{j},{c['re']!r},{c['im']!r}")
        return "\n".join(lines) + "\n"
    out = []
    for b in blocks:
        out.append(f"## {b['method']}\n")
        out.append(f"- status: {b['status']}")
        out.append(f"- iterations: {b['iterations']}")
        out.append(f"- objective: {b['objective']:.17g}")
        c = b["counters"]
        out.append(f"- evaluations: input {c['input_evals']}, basis {c['basis_evals']}")
        if b["message"]:
            out.append(f"- note: {b['message']}")
        out.append("\n| node | variable | re | im |\n|---:|---:|---:|---:|")
        for i, node in enumerate(b["roots"]):
            for j, v in enumerate(node):
                out.append(f"| {i} | {j} | {v['re']:.17g} | {v['im']:.17g} |")
        out.append("")
    return "\n".join(out) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def solve_command(args) -> int:
    if not args.input:
        raise InputError("--input is required")
    obj = _read_json(args.input, "system")
    try:
        system = load_system(obj, args.k)
    except KeyError as e:
        raise InputError(f"system is missing the {e.args[0]!r} field") from e
    except (ValueError, TypeError) as e:
        raise InputError(f"invalid system: {e}") from e
    small = [t for t, b in enumerate(system.bases) if len(b) < system.k]
    if small:
        raise InputError(f"bases {small} have fewer than k={system.k} elements")
    z0 = initial_guess(args, obj, system)
    cfg = solver_config(args)
    methods = list(bench.METHODS) if args.method == "all" else [Method(args.method)]
    blocks, ok = [], True
    for m in methods:
        try:
            res = run(m, system, z0, cfg)
        except ValueError as e:
            raise InputError(f"{m.value}: {e}") from e
        if res.status is Status.FAILED:
            print(f"{m.value}: {res.message}", file=sys.stderr)
        ok &= res.converged
        blocks.append(result_json(system, res))
    _emit(_render_solve(blocks, args.format), args.output)
    return EXIT_OK if ok else EXIT_NUMERIC


def bench_config(args) -> bench.ProblemConfig:
    obj = _read_json(args.input, "benchmark config") if args.input else {}
    if not isinstance(obj, dict):
        raise InputError("benchmark config must be a JSON object")
    for name in ("N", "n", "D", "k", "trials"):
        v = getattr(args, f"cfg_{name}")
        if v is not None:
            obj[name] = v
    if args.seed is not None:
        obj["seed"] = args.seed
    try:
        return bench.ProblemConfig.from_json(obj)
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid benchmark config: {e}") from e


def bench_command(args) -> int:
    cfg = bench_config(args)
    if args.jobs < 1:
        raise InputError("--jobs must be >= 1")
    cmp = bench.run_comparison(cfg, solver_config(args), jobs=args.jobs)
    fmt = "markdown" if args.format == "json" else args.format
    footer = bench.footer_line(cmp)
    if fmt == "csv":
        _emit(bench.emit_table(cmp, "csv"), args.output)
        print(footer, file=sys.stderr)
    else:
        title = (f"{cfg.N} polynomials of degree {cfg.D} in {cfg.n} variable"
                 f"{'s' if cfg.n > 1 else ''} with {cfg.k} common root{'s' if cfg.k > 1 else ''}.")
        _emit(bench.emit_table(cmp, "markdown", footer=f"{title}\n{footer}"), args.output)
    return EXIT_OK


def verify_command(args) -> int:
    checks = bench.verify_complexity(solver_cfg=solver_config(args), raise_on_violation=False)
    if args.format == "json":
        text = json.dumps([{**c.__dict__, "ok": c.ok} for c in checks], indent=2) + "\n"
    else:
        lines = ["| method | counter | doubled | observed | predicted | ok |",
                 "|---|---|---|---:|---:|---|"]
        for c in checks:
            lines.append(f"| {c.method} | {c.counter} | {c.param} | {c.observed:.3f} | "
                         f"{c.predicted:.3f} | {'yes' if c.ok else 'NO'} |")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return EXIT_OK if all(c.ok for c in checks) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="commonroots",
        description="Nearest over-constrained systems with k common roots.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default, seed_default=0):
        sp.add_argument("--max-iter", type=int, default=128)
        sp.add_argument("--step-tol", type=float, default=1e-3)
        sp.add_argument("--beta", type=int, default=40, help="line-search accuracy in bits")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--format", choices=("json", "csv", "markdown"), default=fmt_default)
        sp.add_argument("--output", help="write here instead of standard output")

    s = sub.add_parser("solve", help="run one or all methods on a system file")
    s.add_argument("--input", help="system JSON file or inline JSON")
    s.add_argument("--method", required=True, choices=[m.value for m in Method] + ["all"])
    s.add_argument("--k", type=int, help="override the root count in the system file")
    s.add_argument("--guess", help="JSON file with 'roots' (e.g. a previous solve output)")
    s.add_argument("--random-near", type=float, metavar="RADIUS",
                   help="start uniformly within RADIUS of the system's initial_guess (or 0)")
    common(s, "json")
    s.set_defaults(func=solve_command)

    b = sub.add_parser("bench", help="four-method comparison on random problems")
    b.add_argument("--input", help="benchmark config JSON file or inline JSON")
    for name in ("N", "n", "D", "k", "trials"):
        b.add_argument(f"--{name}", dest=f"cfg_{name}", type=int)
    b.add_argument("--jobs", type=int, default=1)
    common(b, "markdown", seed_default=None)
    b.set_defaults(func=bench_command)

    v = sub.add_parser("verify-complexity", help="check evaluation-count scaling")
    common(v, "markdown")
    v.set_defaults(func=verify_command)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
