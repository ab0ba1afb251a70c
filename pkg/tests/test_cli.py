import json
import subprocess
import sys

import pytest

from commonroots.bench import parse_csv_table
from commonroots.cli import main
from commonroots.functions import SparsePolynomial


def poly(coefs):
    """Univariate polynomial from ascending coefficients."""
    return SparsePolynomial(1, {(i,): c for i, c in enumerate(coefs)}).to_json()


# (x-1)(x-2), (x-1)(x+3), x(x-1): common root 1
CONSISTENT = {"functions": [poly([2, -3, 1]), poly([-3, 2, 1]), poly([0, -1, 1])], "k": 1}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def solve(capsys, *args):
    code = main(["solve", *args])
    out, err = capsys.readouterr()
    return code, out, err


def test_consistent_system_exact_guess(tmp_path, capsys):
    sysf = write(tmp_path, "sys.json", CONSISTENT)
    guess = write(tmp_path, "guess.json", {"roots": [[1.0]]})
    code, out, _ = solve(capsys, "--input", sysf, "--method", "standard-gn", "--guess", guess)
    assert code == 0
    res = json.loads(out)
    assert res["status"] == "converged" and res["objective"] <= 1e-12
    assert res["roots"] == [[{"re": 1.0, "im": 0.0}]]
    assert len(res["perturbations"]) == 3 and len(res["perturbed_system"]) == 3


def test_method_all_shares_problem_and_guess(tmp_path, capsys):
    obj = dict(CONSISTENT, initial_guess=[[1.05]])
    sysf = write(tmp_path, "sys.json", obj)
    code, out, _ = solve(capsys, "--input", sysf, "--method", "all")
    assert code == 0
    blocks = json.loads(out)["results"]
    assert [b["method"] for b in blocks] == ["simplified-gn", "standard-gn", "quadratic",
                                             "conjugate-gradient"]
    for b in blocks:
        assert b["status"] == "converged"
        assert abs(b["roots"][0][0]["re"] - 1.0) < 1e-3


def test_missing_k_names_field(tmp_path, capsys):
    sysf = write(tmp_path, "sys.json", {"functions": CONSISTENT["functions"]})
    code, _, err = solve(capsys, "--input", sysf, "--method", "standard-gn", "--guess", '{"roots": [[1]]}')
    assert code == 1 and "'k'" in err
    # --k supplies it
    code, _, _ = solve(capsys, "--input", sysf, "--method", "standard-gn", "--k", "1",
                       "--guess", '{"roots": [[1]]}')
    assert code == 0


def test_malformed_json_reports_position(tmp_path, capsys):
    sysf = write(tmp_path, "sys.json", '{\n  "functions": [,\n}')
    code, _, err = solve(capsys, "--input", sysf, "--method", "standard-gn")
    assert code == 1 and "line 2" in err and "column" in err


def test_input_errors(tmp_path, capsys):
    sysf = write(tmp_path, "sys.json", CONSISTENT)
    code, _, err = solve(capsys, "--input", sysf, "--method", "standard-gn")
    assert code == 1 and "initial guess" in err
    code, _, err = solve(capsys, "--input", str(tmp_path / "nope.json"), "--method", "quadratic")
    assert code == 1
    code, _, err = solve(capsys, "--input", sysf, "--method", "standard-gn", "--guess", '{"roots": [[1], [2]]}')
    assert code == 1 and "shape" in err
    # simplified G-N needs |B| = k
    wide = write(tmp_path, "wide.json", dict(CONSISTENT, k=2, bases=[[[0], [1], [2]]] * 3))
    code, _, err = solve(capsys, "--input", wide, "--method", "simplified-gn",
                         "--guess", '{"roots": [[1], [2]]}')
    assert code == 1 and "exactly k" in err


def test_rank_failure_exit_2(tmp_path, capsys):
    obj = dict(CONSISTENT, k=2, bases=[[[0], [1]]] * 3)
    sysf = write(tmp_path, "sys.json", obj)
    code, out, err = solve(capsys, "--input", sysf, "--method", "standard-gn",
                           "--guess", '{"roots": [[0.5], [0.5]]}')
    assert code == 2
    assert "degenerate" in err
    assert json.loads(out)["status"] == "failed"


def test_json_output_round_trips_as_guess(tmp_path, capsys):
    # perturbed (inconsistent) system
    obj = {"functions": [poly([2.01, -3, 1]), poly([-3, 2, 1]), poly([0.02, -1, 1])], "k": 1,
           "initial_guess": [[1.3]]}
    sysf = write(tmp_path, "sys.json", obj)
    outf = str(tmp_path / "out.json")
    code, _, _ = solve(capsys, "--input", sysf, "--method", "standard-gn", "--output", outf)
    assert code == 0
    code, out, _ = solve(capsys, "--input", sysf, "--method", "standard-gn", "--guess", outf)
    assert code == 0
    assert json.loads(out)["iterations"] <= 2


def test_random_near_is_seeded(tmp_path, capsys):
    sysf = write(tmp_path, "sys.json", CONSISTENT)
    runs = [solve(capsys, "--input", sysf, "--method", "quadratic", "--random-near", "0.1",
                  "--seed", "3", "--max-iter", "1")[1] for _ in range(2)]
    assert runs[0] == runs[1]


@pytest.mark.parametrize("fmt", ["csv", "markdown"])
def test_solve_other_formats(tmp_path, capsys, fmt):
    sysf = write(tmp_path, "sys.json", CONSISTENT)
    code, out, _ = solve(capsys, "--input", sysf, "--method", "all", "--guess", '{"roots": [[1]]}',
                         "--format", fmt)
    assert code == 0
    if fmt == "csv":
        lines = out.strip().splitlines()
        assert lines[0].startswith("method,status") and len(lines) == 5
    else:
        assert out.count("## ") == 4


def bench(capsys, *args):
    code = main(["bench", "--trials", "1", *args])
    out, err = capsys.readouterr()
    return code, out, err


def test_bench_default_table_and_footer(capsys):
    code, out, _ = bench(capsys, "--seed", "1")
    assert code == 0
    rows = [l for l in out.splitlines() if l.startswith("| ") and "Method" not in l]
    assert len(rows) == 4
    assert "5 polynomials of degree 3 in 1 variable" in out
    assert "problems for which all methods converged:" in out.splitlines()[-1]


def test_bench_seed_repetition_identical(capsys):
    a = bench(capsys, "--seed", "9")[1]
    b = bench(capsys, "--seed", "9")[1]
    assert a == b


def test_bench_csv_parses(capsys):
    code, out, err = bench(capsys, "--seed", "2", "--format", "csv")
    assert code == 0
    rows = parse_csv_table(out)
    assert [r.method for r in rows] == ["Simp G-N", "Std G-N", "Quad It", "Conj Grd"]
    assert "problems for which all methods converged" in err


def test_bench_config_errors(tmp_path, capsys):
    assert bench(capsys, "--N", "1")[0] == 1
    cfg = write(tmp_path, "cfg.json", {"N": 5, "n": 1, "D": 3, "k": 1, "colour": 2})
    assert bench(capsys, "--input", cfg)[0] == 1
    assert bench(capsys, "--jobs", "0")[0] == 1


def test_bench_config_file(tmp_path, capsys):
    cfg = write(tmp_path, "cfg.json", {"N": 4, "n": 1, "D": 2, "k": 1, "trials": 1, "seed": 4})
    code, out, _ = bench(capsys, "--input", cfg)
    assert code == 0 and "4 polynomials of degree 2" in out


def test_verify_complexity_command(capsys):
    code = main(["verify-complexity", "--format", "json"])
    out, _ = capsys.readouterr()
    checks = json.loads(out)
    assert code == 0 and checks and all(c["ok"] for c in checks)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "commonroots.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "solve" in r.stdout
