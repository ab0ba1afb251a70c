"""Nearest over-constrained systems with k common roots.

Given N > n analytic functions in n variables and perturbation bases
B_1..B_N, find the root tuple z minimizing the norm of the generalized
Weierstrass map and hence the nearest system with k common roots.
"""

from .functions import (
    AnalyticFunction,
    BasisSet,
    BlackBoxFunction,
    SparsePolynomial,
    SystemInstance,
    load_system,
    smallest_degree_basis,
)
from .interpolation import RankDeficient
from .solvers import Method, SolverConfig, SolverResult, Status, run
from .weierstrass import (
    gradient_of_objective,
    jacobian,
    objective,
    perturbed_system,
    weierstrass_map,
)

__all__ = [
    "AnalyticFunction", "BasisSet", "BlackBoxFunction", "SparsePolynomial", "SystemInstance",
    "load_system", "smallest_degree_basis", "RankDeficient", "Method", "SolverConfig",
    "SolverResult", "Status", "run", "gradient_of_objective", "jacobian", "objective",
    "perturbed_system", "weierstrass_map",
]
__version__ = "0.1.0"
