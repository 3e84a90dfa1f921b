"""Sparse approximations of Matérn Gaussian fields for kriging.

Markov (SPDE precision on spline or DB3 bases), process convolution and
covariance tapering, compared against dense optimal kriging.
"""
from .basis import BasisSpec, build_basis, evaluate_basis
from .convolution import make_convolution, regular_lattice
from .experiments import Experiment, MethodSizes, make_method, simulate_truth
from .kriging import Convolution, KrigingProblem, Markov, Optimal, Taper, krige
from .matern import MaternParams, matern_cov
from .precision import build_Q, implied_covariance
from .sparse import cholesky
from .taper import TaperSpec, wendland

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "build_basis",
    "evaluate_basis",
    "make_convolution",
    "regular_lattice",
    "Experiment",
    "MethodSizes",
    "make_method",
    "simulate_truth",
    "Convolution",
    "KrigingProblem",
    "Markov",
    "Optimal",
    "Taper",
    "krige",
    "MaternParams",
    "matern_cov",
    "build_Q",
    "implied_covariance",
    "cholesky",
    "TaperSpec",
    "wendland",
]
