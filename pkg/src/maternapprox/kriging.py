"""Simple (zero-mean) kriging with the exact model and its three approximations.

Every engine splits its work into three timed steps:

1. build all matrices except the prediction cross matrix ``M``;
2. solve the central linear system for ``u``;
3. build ``M`` (basis functions or covariances at the prediction sites)
   and form the predictor ``M u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .basis import BasisSpec, evaluate_basis, build_basis
from .convolution import ConvolutionSpec, convolution_basis
from .matern import MaternParams, as_points, dense_cov_matrix
from .precision import build_Q
from .sparse import cholesky, sandwich
from .taper import TaperSpec, tapered_cov_matrix

__all__ = [
    "CapExceeded",
    "Optimal",
    "Markov",
    "Convolution",
    "Taper",
    "KrigingProblem",
    "Timings",
    "KrigingResult",
    "krige",
    "krige_optimal",
    "krige_lowrank",
    "krige_tapered",
]

DENSE_CAP = 8000
STEP3_BLOCK = 256


class CapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Optimal:
    cap: int = DENSE_CAP
    name: str = "optimal"


@dataclass(frozen=True)
class Markov:
    basis: BasisSpec
    c_inv_mode: str = None
    name: str = "markov"


@dataclass(frozen=True)
class Convolution:
    spec: ConvolutionSpec
    name: str = "convolution"


@dataclass(frozen=True)
class Taper:
    spec: TaperSpec
    # allow tapers outside their validity range in nu
    override: bool = False
    # taper identically one inside theta (degenerate check)
    unit_taper: bool = False
    name: str = "taper"


@dataclass(frozen=True)
class KrigingProblem:
    obs_locs: np.ndarray
    y: np.ndarray
    sigma: float
    pred_locs: np.ndarray
    params: MaternParams
    method: object = Optimal()

    def __post_init__(self):
        obs = as_points(self.obs_locs)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "obs_locs", obs)
        object.__setattr__(self, "pred_locs", as_points(self.pred_locs))
        object.__setattr__(self, "y", y)
        if obs.shape[0] < 1:
            raise ValueError("at least one observation is required")
        if y.shape[0] != obs.shape[0]:
            raise ValueError(f"{y.shape[0]} observations for {obs.shape[0]} locations")
        if not self.sigma > 0:
            raise ValueError("noise standard deviation must be positive")

    @property
    def m(self):
        return self.obs_locs.shape[0]


@dataclass
class Timings:
    step1: float = 0.0
    step2: float = 0.0
    step3: float = 0.0

    @property
    def total(self):
        return self.step1 + self.step2 + self.step3


@dataclass
class KrigingResult:
    predictions: np.ndarray
    timings: Timings
    method: str
    variance: np.ndarray = None
    prior_variance: np.ndarray = None
    meta: dict = field(default_factory=dict)


class _Clock:
    def __init__(self):
        self.t = perf_counter()

    def lap(self):
        now = perf_counter()
        dt, self.t = now - self.t, now
        return dt


def krige(problem, variance=False):
    method = problem.method
    if isinstance(method, Optimal):
        return krige_optimal(problem, variance)
    if isinstance(method, (Markov, Convolution)):
        return krige_lowrank(problem, variance)
    if isinstance(method, Taper):
        return krige_tapered(problem, variance)
    raise TypeError(f"unknown kriging method {method!r}")


def krige_optimal(problem, variance=False):
    """Exact kriging with the dense Matérn covariance."""
    p = problem.params
    cap = getattr(problem.method, "cap", DENSE_CAP)
    if problem.m > cap:
        raise CapExceeded(f"{problem.m} observations exceed the dense cap {cap}")
    clock = _Clock()
    timings = Timings()
    sigma_y = dense_cov_matrix(p, problem.obs_locs)
    sigma_y[np.diag_indices_from(sigma_y)] += problem.sigma**2
    timings.step1 = clock.lap()

    factor = scipy.linalg.cho_factor(sigma_y, lower=True, overwrite_a=True)
    u = scipy.linalg.cho_solve(factor, problem.y)
    timings.step2 = clock.lap()

    pred = np.empty(problem.pred_locs.shape[0])
    for start in range(0, pred.size, STEP3_BLOCK):
        block = problem.pred_locs[start : start + STEP3_BLOCK]
        pred[start : start + STEP3_BLOCK] = dense_cov_matrix(p, block, problem.obs_locs) @ u
    timings.step3 = clock.lap()

    result = KrigingResult(pred, timings, "optimal", meta={"m": problem.m})
    if variance:
        var = np.empty(pred.size)
        for start in range(0, pred.size, STEP3_BLOCK):
            block = problem.pred_locs[start : start + STEP3_BLOCK]
            cross = dense_cov_matrix(p, block, problem.obs_locs)
            w = scipy.linalg.cho_solve(factor, cross.T)
            var[start : start + STEP3_BLOCK] = p.variance - np.einsum("ij,ji->i", cross, w)
        result.variance = var
        result.prior_variance = np.full(pred.size, p.variance)
    return result


def krige_lowrank(problem, variance=False):
    """Kriging with a basis expansion: ``B2 (Q_w + B1' B1 / s^2)^-1 B1' Y / s^2``."""
    method = problem.method
    inv_noise = problem.sigma**-2
    clock = _Clock()
    timings = Timings()

    if isinstance(method, Markov):
        basis = build_basis(method.basis)
        model = build_Q(basis, problem.params, method.c_inv_mode)
        B1 = evaluate_basis(method.basis, problem.obs_locs)
        H = model.Q + inv_noise * sandwich(B1)
        v = inv_noise * (B1.T @ problem.y)
        timings.step1 = clock.lap()

        if model.is_sparse:
            factor = cholesky(H)
            solve_h = factor.solve
            nnz_l = factor.nnz
        else:
            # exact mass matrix: dense precision, reference use only
            factor = scipy.linalg.cho_factor(np.asarray(H), lower=True)
            solve_h = lambda rhs: scipy.linalg.cho_solve(factor, rhs)  # noqa: E731
            nnz_l = H.size
        u = solve_h(v)
        timings.step2 = clock.lap()

        B2 = evaluate_basis(method.basis, problem.pred_locs)
        pred = B2 @ u
        timings.step3 = clock.lap()

        meta = {"n": basis.n, "nnz_L": nnz_l}
        prior = None
        if variance:
            qf = model.factor()
            prior = lambda rhs: model.solve(rhs, qf)  # noqa: E731
        name = f"markov-{method.basis.family}"
    elif isinstance(method, Convolution):
        spec = method.spec
        B1 = convolution_basis(spec, problem.obs_locs)
        H = inv_noise * (B1.T @ B1)
        H[np.diag_indices_from(H)] += 1.0 / spec.weight_variance
        v = inv_noise * (B1.T @ problem.y)
        timings.step1 = clock.lap()

        factor = scipy.linalg.cho_factor(H, lower=True, overwrite_a=True)
        u = scipy.linalg.cho_solve(factor, v)
        timings.step2 = clock.lap()

        B2 = convolution_basis(spec, problem.pred_locs)
        pred = B2 @ u
        timings.step3 = clock.lap()

        meta = {"n": spec.n}
        solve_h = lambda rhs: scipy.linalg.cho_solve(factor, rhs)  # noqa: E731
        prior = lambda rhs: spec.weight_variance * rhs  # noqa: E731
        name = "convolution"
    else:
        raise TypeError(f"not a low-rank method: {method!r}")

    result = KrigingResult(np.asarray(pred).ravel(), timings, name, meta=meta)
    if variance:
        B2d = B2.toarray() if sp.issparse(B2) else B2
        result.variance = np.einsum("ij,ji->i", B2d, solve_h(B2d.T))
        result.prior_variance = np.einsum("ij,ji->i", B2d, prior(B2d.T))
    return result


def krige_tapered(problem, variance=False):
    """Kriging with the tapered covariance; sparse Cholesky of the tapered ``Sigma_Y``."""
    method = problem.method
    spec = method.spec
    p = problem.params
    spec.check_valid(p.nu, p.d, override=method.override or method.unit_taper)
    use_taper = not method.unit_taper
    clock = _Clock()
    timings = Timings()
    S = tapered_cov_matrix(p, spec, problem.obs_locs, taper=use_taper)
    S = S + problem.sigma**2 * sp.identity(problem.m, format="csc")
    timings.step1 = clock.lap()

    factor = cholesky(S)
    u = factor.solve(problem.y)
    timings.step2 = clock.lap()

    M = tapered_cov_matrix(p, spec, problem.pred_locs, problem.obs_locs, taper=use_taper)
    pred = M @ u
    timings.step3 = clock.lap()

    result = KrigingResult(
        np.asarray(pred).ravel(),
        timings,
        "taper",
        meta={"theta": spec.theta, "nnz_S": S.nnz, "nnz_L": factor.nnz},
    )
    if variance:
        Md = M.toarray()
        result.variance = p.variance - np.einsum("ij,ji->i", Md, factor.solve(Md.T))
        result.prior_variance = np.full(Md.shape[0], p.variance)
    return result
