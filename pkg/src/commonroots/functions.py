"""Input systems: sparse multivariate polynomials, black-box analytic
functions, perturbation bases and the assembled problem instance."""

from __future__ import annotations

import itertools
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Exponents = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


def _point(x, n: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=complex))
    if p.shape != (n,):
        raise DimensionMismatch(f"point has shape {p.shape}, expected ({n},)")
    return p


class AnalyticFunction(ABC):
    """A holomorphic function of ``nvars`` complex variables.

    Subclasses provide the value and gradient; ``hessian`` defaults to central
    differences of the gradient unless ``has_hessian`` is true.
    """

    nvars: int
    has_hessian: bool = False

    @abstractmethod
    def value(self, x) -> complex: ...

    @abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    def partial(self, j: int, x) -> complex:
        if not 0 <= j < self.nvars:
            raise DimensionMismatch(f"variable index {j} out of range for {self.nvars} variables")
        return self.gradient(x)[j]

    def hessian(self, x) -> np.ndarray:
        return fd_hessian(self.gradient, _point(x, self.nvars))

    def __call__(self, x) -> complex:
        return self.value(x)

    def __sub__(self, other: "AnalyticFunction") -> "AnalyticFunction":
        return subtract_perturbation(self, other)


def fd_hessian(grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central differences of a holomorphic gradient along the real axes.

    Step h_j = eps**(1/3) * max(1, |x_j|).
    """
    n = x.size
    h = np.finfo(float).eps ** (1 / 3) * np.maximum(1.0, np.abs(x))
    out = np.empty((n, n), dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h[j]
        out[:, j] = (grad(x + e) - grad(x - e)) / (2 * h[j])
    return 0.5 * (out + out.T)


class SparsePolynomial(AnalyticFunction):
    """Polynomial stored as a mapping from exponent tuples to complex coefficients.

    >>> p = SparsePolynomial(2, {(1, 1): 1, (0, 0): 3})
    >>> p.value([2, 5])
    (13+0j)
    """

    has_hessian = True
    __slots__ = ("nvars", "terms", "_exps", "_coefs")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], complex] | None = None):
        if nvars < 1:
            raise ValueError("need at least one variable")
        clean: dict[Exponents, complex] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != nvars:
                raise DimensionMismatch(f"exponent {e} has length {len(e)}, expected {nvars}")
            if any(v < 0 for v in e):
                raise ValueError(f"negative exponent in {e}")
            c = complex(c)
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for {e}")
            c = clean.get(e, 0) + c
            if c == 0:
                clean.pop(e, None)
            else:
                clean[e] = c
        self.nvars = nvars
        self.terms = clean
        self._exps = np.array(list(clean), dtype=np.int64).reshape(len(clean), nvars)
        self._coefs = np.array(list(clean.values()), dtype=complex)

    @classmethod
    def monomial(cls, exps: Sequence[int], coef: complex = 1.0) -> "SparsePolynomial":
        return cls(len(exps), {tuple(exps): coef})

    @classmethod
    def constant(cls, nvars: int, c: complex) -> "SparsePolynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def from_coefficients(cls, basis: Sequence["SparsePolynomial"], coefs) -> "SparsePolynomial":
        """Linear combination ``sum(c_i * b_i)`` of polynomial basis elements."""
        out: dict[Exponents, complex] = {}
        for b, c in zip(basis, coefs):
            for e, bc in b.terms.items():
                out[e] = out.get(e, 0) + c * bc
        return cls(basis[0].nvars, out)

    @property
    def degree(self) -> int:
        return int(self._exps.sum(axis=1).max()) if len(self.terms) else 0

    def is_zero(self) -> bool:
        return not self.terms

    def _monomials(self, x: np.ndarray, exps: np.ndarray) -> np.ndarray:
        return np.prod(x[np.newaxis, :] ** exps, axis=1)

    def value(self, x) -> complex:
        x = _point(x, self.nvars)
        if not self.terms:
            return 0j
        return complex(self._monomials(x, self._exps) @ self._coefs)

    def gradient(self, x) -> np.ndarray:
        x = _point(x, self.nvars)
        g = np.zeros(self.nvars, dtype=complex)
        for j in range(self.nvars):
            ej = self._exps[:, j]
            mask = ej > 0
            if not mask.any():
                continue
            d = self._exps[mask].copy()
            d[:, j] -= 1
            g[j] = self._monomials(x, d) @ (self._coefs[mask] * ej[mask])
        return g

    def hessian(self, x) -> np.ndarray:
        x = _point(x, self.nvars)
        n = self.nvars
        h = np.zeros((n, n), dtype=complex)
        for j in range(n):
            for l in range(j, n):
                fac = self._exps[:, j] * (self._exps[:, l] - (j == l))
                mask = fac > 0
                if not mask.any():
                    continue
                d = self._exps[mask].copy()
                d[:, j] -= 1
                d[:, l] -= 1
                h[j, l] = h[l, j] = self._monomials(x, d) @ (self._coefs[mask] * fac[mask])
        return h

    def __add__(self, other):
        if isinstance(other, SparsePolynomial):
            _check_nvars(self, other)
            t = dict(self.terms)
            for e, c in other.terms.items():
                t[e] = t.get(e, 0) + c
            return SparsePolynomial(self.nvars, t)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SparsePolynomial):
            return self + (-1.0) * other
        return super().__sub__(other)

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return SparsePolynomial(self.nvars, {e: c * v for e, v in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __eq__(self, other):
        return (
            isinstance(other, SparsePolynomial)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"SparsePolynomial({self.nvars}, 0)"
        return f"SparsePolynomial({self.nvars}, {self.terms!r})"

    def to_json(self) -> dict:
        return {
            "variables": self.nvars,
            "terms": [
                {"exponents": list(e), "re": c.real, "im": c.imag}
                for e, c in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SparsePolynomial":
        n = int(obj["variables"])
        terms: dict[Exponents, complex] = {}
        for t in obj["terms"]:
            e = tuple(t["exponents"])
            terms[e] = terms.get(e, 0) + complex(t.get("re", 0.0), t.get("im", 0.0))
        return cls(n, terms)


def _check_nvars(a: AnalyticFunction, b: AnalyticFunction) -> None:
    if a.nvars != b.nvars:
        raise DimensionMismatch(f"variable counts differ: {a.nvars} vs {b.nvars}")


class BlackBoxFunction(AnalyticFunction):
    """Wraps user callables; the Hessian falls back to finite differences."""

    def __init__(self, nvars: int, value: Callable, gradient: Callable, hessian: Callable | None = None):
        self.nvars = nvars
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.has_hessian = hessian is not None

    def value(self, x) -> complex:
        return complex(self._value(_point(x, self.nvars)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(_point(x, self.nvars)), dtype=complex)

    def hessian(self, x) -> np.ndarray:
        if self._hessian is None:
            return super().hessian(x)
        return np.asarray(self._hessian(_point(x, self.nvars)), dtype=complex)


class DifferenceFunction(AnalyticFunction):
    """Pointwise ``f - p``."""

    def __init__(self, f: AnalyticFunction, p: AnalyticFunction):
        _check_nvars(f, p)
        self.nvars = f.nvars
        self.f, self.p = f, p
        self.has_hessian = f.has_hessian and p.has_hessian

    def value(self, x) -> complex:
        return self.f.value(x) - self.p.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.f.gradient(x) - self.p.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.f.hessian(x) - self.p.hessian(x)


def evaluate(f: AnalyticFunction, point) -> complex:
    return f.value(point)


def partial(f: AnalyticFunction, j: int, point) -> complex:
    """Partial derivative along variable ``j`` (0-based)."""
    return f.partial(j, point)


def subtract_perturbation(f: AnalyticFunction, p: AnalyticFunction) -> AnalyticFunction:
    _check_nvars(f, p)
    if isinstance(f, SparsePolynomial) and isinstance(p, SparsePolynomial):
        return f + (-1.0) * p
    return DifferenceFunction(f, p)


def graded_lex_monomials(n: int) -> Iterable[Exponents]:
    """Monomials by total degree, lexicographic with x_1 highest inside a degree."""
    for d in itertools.count():
        # compositions of d into n parts, largest leading exponent first
        for e in _compositions(d, n):
            yield e


def _compositions(d: int, n: int) -> Iterable[Exponents]:
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, n - 1):
            yield (first,) + rest


def monomials_up_to_degree(n: int, degree: int) -> list[Exponents]:
    out = []
    for d in range(degree + 1):
        out.extend(_compositions(d, n))
    return out


@dataclass(frozen=True)
class BasisSet:
    """Ordered perturbation basis. Monomial bases are evaluated in one shot."""

    elements: tuple[AnalyticFunction, ...]

    def __post_init__(self):
        els = tuple(self.elements)
        if not els:
            raise ValueError("empty basis")
        n = els[0].nvars
        for b in els:
            if b.nvars != n:
                raise DimensionMismatch("basis elements have different variable counts")
        object.__setattr__(self, "elements", els)
        exps = None
        if all(isinstance(b, SparsePolynomial) and len(b.terms) == 1 for b in els):
            keys = [next(iter(b.terms)) for b in els]
            coefs = [b.terms[e] for b, e in zip(els, keys)]
            if all(c == 1 for c in coefs):
                exps = np.array(keys, dtype=np.int64)
        object.__setattr__(self, "_exps", exps)

    @classmethod
    def from_exponents(cls, exps: Iterable[Sequence[int]]) -> "BasisSet":
        return cls(tuple(SparsePolynomial.monomial(e) for e in exps))

    @property
    def nvars(self) -> int:
        return self.elements[0].nvars

    @property
    def exponents(self) -> np.ndarray | None:
        return self._exps

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def values(self, x) -> np.ndarray:
        """(m,) vector of basis values at ``x``."""
        x = _point(x, self.nvars)
        if self._exps is not None:
            return np.prod(x[np.newaxis, :] ** self._exps, axis=1)
        return np.array([b.value(x) for b in self.elements], dtype=complex)

    def gradients(self, x) -> np.ndarray:
        """(m, n) array of basis partials at ``x``."""
        x = _point(x, self.nvars)
        if self._exps is None:
            return np.array([b.gradient(x) for b in self.elements], dtype=complex)
        e = self._exps
        m, n = e.shape
        out = np.zeros((m, n), dtype=complex)
        for j in range(n):
            d = e.copy()
            d[:, j] = np.maximum(d[:, j] - 1, 0)
            out[:, j] = e[:, j] * np.prod(x ** d, axis=1)
        return out

    def hessians(self, x) -> np.ndarray:
        """(m, n, n) array of basis second partials at ``x``."""
        x = _point(x, self.nvars)
        if self._exps is None:
            return np.array([b.hessian(x) for b in self.elements], dtype=complex)
        e = self._exps
        m, n = e.shape
        out = np.zeros((m, n, n), dtype=complex)
        for j in range(n):
            for l in range(j, n):
                fac = e[:, j] * (e[:, l] - (j == l))
                d = e.copy()
                d[:, j] -= 1
                d[:, l] -= 1
                d = np.maximum(d, 0)
                out[:, j, l] = out[:, l, j] = fac * np.prod(x ** d, axis=1)
        return out

    def combination(self, coefs) -> AnalyticFunction:
        """The function ``sum(c_i * b_i)``."""
        coefs = np.asarray(coefs, dtype=complex)
        if all(isinstance(b, SparsePolynomial) for b in self.elements):
            return SparsePolynomial.from_coefficients(self.elements, coefs)
        return _LinearCombination(self, coefs)


class _LinearCombination(AnalyticFunction):
    def __init__(self, basis: BasisSet, coefs: np.ndarray):
        self.nvars = basis.nvars
        self.basis = basis
        self.coefs = coefs
        self.has_hessian = all(b.has_hessian for b in basis)

    def value(self, x):
        return complex(self.basis.values(x) @ self.coefs)

    def gradient(self, x):
        return self.coefs @ self.basis.gradients(x)

    def hessian(self, x):
        return np.tensordot(self.coefs, self.basis.hessians(x), axes=1)


def smallest_degree_basis(n: int, k: int) -> BasisSet:
    """The first ``k`` monomials in graded lexicographic order."""
    if k < 1:
        raise ValueError("k must be positive")
    return BasisSet.from_exponents(itertools.islice(graded_lex_monomials(n), k))


@dataclass(frozen=True)
class SystemInstance:
    """N functions in n variables, their perturbation bases and the root count k."""

    functions: tuple[AnalyticFunction, ...]
    bases: tuple[BasisSet, ...]
    k: int
    nvars: int = field(init=False)

    def __post_init__(self):
        fs = tuple(self.functions)
        bs = tuple(self.bases)
        object.__setattr__(self, "functions", fs)
        object.__setattr__(self, "bases", bs)
        if not fs:
            raise ValueError("no functions")
        n = fs[0].nvars
        if len(bs) != len(fs):
            raise DimensionMismatch(f"{len(fs)} functions but {len(bs)} bases")
        for f in fs:
            if f.nvars != n:
                raise DimensionMismatch("functions have different variable counts")
        for b in bs:
            if b.nvars != n:
                raise DimensionMismatch("basis variable count differs from the functions'")
        if len(fs) <= n:
            raise ValueError(f"system is not over-constrained: N={len(fs)} <= n={n}")
        if self.k < 1:
            raise ValueError("k must be positive")
        object.__setattr__(self, "nvars", n)

    @classmethod
    def with_default_bases(cls, functions: Sequence[AnalyticFunction], k: int) -> "SystemInstance":
        n = functions[0].nvars
        b = smallest_degree_basis(n, k)
        return cls(tuple(functions), (b,) * len(functions), k)

    @property
    def N(self) -> int:
        return len(self.functions)

    def scale(self) -> float:
        """1 + largest coefficient magnitude over polynomial inputs (1 otherwise)."""
        c = 0.0
        for f in self.functions:
            if isinstance(f, SparsePolynomial) and f.terms:
                c = max(c, float(np.max(np.abs(f._coefs))))
        return 1.0 + c


def load_system(obj: Mapping, k: int | None = None) -> SystemInstance:
    """Build a system from the JSON object format.

    ``{"functions": [poly, ...], "k": int, "bases": [[exponents, ...], ...]}``;
    ``bases`` is optional and defaults to the smallest-degree monomials.
    """
    if "functions" not in obj:
        raise KeyError("functions")
    fs = [SparsePolynomial.from_json(p) for p in obj["functions"]]
    if k is None:
        if "k" not in obj:
            raise KeyError("k")
        k = int(obj["k"])
    if obj.get("bases") is None:
        return SystemInstance.with_default_bases(fs, k)
    bases = [BasisSet.from_exponents(b) for b in obj["bases"]]
    return SystemInstance(tuple(fs), tuple(bases), k)


def dump_system(sys: SystemInstance) -> dict:
    out = {"functions": [f.to_json() for f in sys.functions], "k": sys.k}
    if all(b.exponents is not None for b in sys.bases):
        out["bases"] = [b.exponents.tolist() for b in sys.bases]
    return out


def loads_system(text: str, k: int | None = None) -> SystemInstance:
    return load_system(json.loads(text), k)
