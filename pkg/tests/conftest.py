import numpy as np
import pytest

from commonroots.functions import BasisSet, SparsePolynomial, SystemInstance, monomials_up_to_degree

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def random_poly(rng, n, degree, scale=1.0, complex_coefs=True):
    terms = {}
    for e in monomials_up_to_degree(n, degree):
        c = rng.normal() + (1j * rng.normal() if complex_coefs else 0)
        terms[e] = scale * c
    return SparsePolynomial(n, terms)


def random_system(rng, N, n, k, m=None, degree=3):
    """Random system with monomial bases of size m (default k)."""
    m = k if m is None else m
    mons = monomials_up_to_degree(n, 6)
    fs = tuple(random_poly(rng, n, degree) for _ in range(N))
    basis = BasisSet.from_exponents(mons[:m])
    return SystemInstance(fs, (basis,) * N, k)


def random_nodes(rng, k, n, radius=1.0):
    """k points in the polydisk of the given radius."""
    r = radius * np.sqrt(rng.random((k, n)))
    return r * np.exp(2j * np.pi * rng.random((k, n)))


def consistent_system(rng, N, n, k, m=None, degree=3):
    """Random system made exactly consistent at random nodes; returns (system, roots)."""
    m = k if m is None else m
    z = random_nodes(rng, k, n)
    full = BasisSet.from_exponents(monomials_up_to_degree(n, degree))
    V = np.array([full.values(p) for p in z])
    pinv = np.linalg.pinv(V)
    fs = []
    for _ in range(N):
        c = rng.normal(size=len(full)) + 1j * rng.normal(size=len(full))
        fs.append(SparsePolynomial.from_coefficients(full.elements, c - pinv @ (V @ c)))
    basis = BasisSet.from_exponents(monomials_up_to_degree(n, 6)[:m])
    return SystemInstance(tuple(fs), (basis,) * N, k), z


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
    def record(name: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
