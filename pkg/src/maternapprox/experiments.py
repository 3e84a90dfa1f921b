"""Ground-truth simulation, covariance error, kriging error and method factories."""
from __future__ import annotations

from dataclasses import dataclass, field
from statistics import median

import numpy as np
import scipy.linalg

from .basis import BasisSpec
from .convolution import (
    KernelSingular,
    convolution_cov,
    kernel_params,
    make_convolution,
    regular_lattice,
)
from .kriging import (
    CapExceeded,
    Convolution,
    KrigingProblem,
    Markov,
    Optimal,
    Taper,
    Timings,
    krige,
)
from .matern import MaternParams, as_points, dense_cov_matrix, matern_cov, pairwise_distances
from .precision import AlphaNotInteger, AlphaOutOfRange, build_Q, implied_covariance
from .basis import build_basis
from .sparse import cholesky
from .taper import NuNotTaperable, TaperSpec, select_taper_kind, tapered_cov_matrix

__all__ = [
    "METHODS",
    "MethodSizes",
    "Experiment",
    "Truth",
    "EpsGrid",
    "MethodSkipped",
    "rng_for",
    "prediction_grid",
    "simulate_truth",
    "make_method",
    "method_covariance",
    "epsilon_at",
    "covariance_error",
    "kriging_error",
    "run_replicate",
    "warmup",
]

METHODS = (
    "optimal",
    "markov-s1",
    "markov-s2",
    "markov-s3",
    "exact-s1",
    "exact-s2",
    "exact-s3",
    "markov-db3",
    "convolution",
    "taper",
)

SIM_CAP = 10000
# added to the diagonal, relative to the variance, when the truth covariance is
# numerically singular
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


class MethodSkipped(Exception):
    """A method that cannot represent the requested model; carries the reason."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


def _for_nu(value, nu):
    """A size knob is either a number or a ``{nu: number}`` mapping."""
    if isinstance(value, dict):
        for key, v in value.items():
            if abs(float(key) - nu) < 1e-12:
                return v
        raise MethodSkipped(f"no size configured for nu={nu:g}")
    return value


@dataclass(frozen=True)
class MethodSizes:
    s_nodes: int = 45
    # spline bases with the exact mass matrix are dense, so they get their own size
    exact_nodes: int = 7
    db3_nodes: int = 18
    conv_nodes: object = 11
    taper_theta: object = 0.55
    expand: float = 2.0  # in units of the range
    # nodes span the expanded box (True) or the data box (False)
    fixed_count: bool = False
    # use Wendland2 beyond its validity range instead of skipping the taper
    taper_override: bool = False


@dataclass(frozen=True)
class Experiment:
    nu: float
    range: float
    lower: tuple = (0.0, 0.0)
    upper: tuple = (5.0, 5.0)
    m: int = 1000
    sigma: float = 0.01
    grid: tuple = (40, 40)
    replicates: int = 20
    seed: int = 0
    sim_cap: int = SIM_CAP

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if len(self.lower) != len(self.upper) or len(self.grid) != len(self.lower):
            raise ValueError("box and grid dimensions disagree")

    @property
    def d(self):
        return len(self.lower)

    @property
    def params(self):
        return MaternParams.from_range(self.nu, self.range, self.d)


@dataclass
class Truth:
    obs_locs: np.ndarray
    pred_locs: np.ndarray
    x_obs: np.ndarray
    x_pred: np.ndarray
    y: np.ndarray


def rng_for(seed, replicate):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replicate])))


def prediction_grid(lower, upper, dims):
    """Row-major grid including the box edges; first axis varies slowest."""
    axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(lower, upper, dims)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _dense_cholesky(cov, variance):
    for jitter in JITTER_LADDER:
        a = cov.copy()
        a[np.diag_indices_from(a)] += jitter * variance
        try:
            return scipy.linalg.cholesky(a, lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("truth covariance is not positive definite even with jitter")


def simulate_truth(exp, replicate, sigma=None, include_grid=True):
    """Uniform locations, a Matérn draw at observation and grid sites, noisy observations.

    With ``include_grid=False`` the field is drawn at the observation sites
    only and ``x_pred`` is None.
    """
    sigma = exp.sigma if sigma is None else sigma
    pred = prediction_grid(exp.lower, exp.upper, exp.grid)
    total = exp.m + (pred.shape[0] if include_grid else 0)
    if total > exp.sim_cap:
        raise CapExceeded(f"{total} simulation sites exceed the cap {exp.sim_cap}")
    rng = rng_for(exp.seed, replicate)
    lo = np.asarray(exp.lower, dtype=float)
    hi = np.asarray(exp.upper, dtype=float)
    obs = lo + (hi - lo) * rng.random((exp.m, exp.d))
    sites = np.vstack([obs, pred]) if include_grid else obs
    p = exp.params
    L, _ = _dense_cholesky(dense_cov_matrix(p, sites), p.variance)
    x = L @ rng.standard_normal(total)
    noise = rng.standard_normal(exp.m)
    x_obs = x[: exp.m]
    x_pred = x[exp.m :] if include_grid else None
    y = x_obs + sigma * noise if sigma > 0 else x_obs.copy()
    return Truth(obs, pred, x_obs, x_pred, y)


def _spline_order(name):
    return int(name[-1])


def make_method(name, params, lower, upper, sizes=MethodSizes()):
    """Kriging-method object for ``name``; raises :class:`MethodSkipped` with a reason."""
    nu = params.nu
    expand = sizes.expand * params.range
    if name == "optimal":
        return Optimal()
    if name.startswith(("markov-", "exact-")):
        family = "db3" if name.endswith("db3") else "spline"
        if family == "db3":
            spec = BasisSpec.on_box(
                "db3", lower, upper, _for_nu(sizes.db3_nodes, nu),
                expand=expand, fixed_count=sizes.fixed_count,
            )
            mode = "identity"
        else:
            exact = name.startswith("exact-")
            nodes = sizes.exact_nodes if exact else sizes.s_nodes
            spec = BasisSpec.on_box(
                "spline", lower, upper, _for_nu(nodes, nu),
                order=_spline_order(name), expand=expand, fixed_count=sizes.fixed_count,
            )
            mode = "exact" if exact else "lumped"
        alpha = params.alpha
        if abs(alpha - round(alpha)) > 1e-12:
            raise MethodSkipped("alpha not integer")
        if not 1 <= round(alpha) <= 5:
            raise MethodSkipped("alpha out of range")
        return Markov(spec, mode, name=name)
    if name == "convolution":
        try:
            kernel_params(params)
        except KernelSingular:
            raise MethodSkipped("kernel singular") from None
        lattice = regular_lattice(lower, upper, _for_nu(sizes.conv_nodes, nu))
        return Convolution(make_convolution(params, lattice))
    if name == "taper":
        try:
            kind = select_taper_kind(nu)
        except NuNotTaperable:
            if not sizes.taper_override:
                raise MethodSkipped("nu not taperable") from None
            kind = "wendland2"
        spec = TaperSpec(kind, float(_for_nu(sizes.taper_theta, nu)))
        return Taper(spec, override=sizes.taper_override)
    raise ValueError(f"unknown method {name!r}")


def method_covariance(method, params):
    """``cov(a, b)`` returning the dense covariance the method implies."""
    if isinstance(method, Optimal):
        return lambda a, b: dense_cov_matrix(params, a, b)
    if isinstance(method, Markov):
        try:
            model = build_Q(build_basis(method.basis), params, method.c_inv_mode)
        except (AlphaNotInteger, AlphaOutOfRange) as exc:
            raise MethodSkipped(str(exc)) from None
        factor = model.factor()
        return lambda a, b: implied_covariance(model, a, b, factor)
    if isinstance(method, Convolution):
        return lambda a, b: convolution_cov(method.spec, a, b)
    if isinstance(method, Taper):
        return lambda a, b: tapered_cov_matrix(params, method.spec, a, b).toarray()
    raise TypeError(f"unknown method {method!r}")


@dataclass(frozen=True)
class EpsGrid:
    """``s`` lattice over the central part of the region; ``u`` grid around each ``s``."""

    s_per_axis: int = 5
    u_per_axis: int = 41
    halfwidth: float = 2.0  # in units of the range
    central_fraction: float = 0.5

    def s_points(self, lower, upper):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        mid, half = (lo + hi) / 2, (hi - lo) * self.central_fraction / 2
        return prediction_grid(mid - half, mid + half, (self.s_per_axis,) * lo.size)

    def u_offsets(self, range_, d):
        w = self.halfwidth * range_
        return prediction_grid((-w,) * d, (w,) * d, (self.u_per_axis,) * d)


def epsilon_at(cov, params, s_points, offsets):
    """Per-``s`` standardized squared L2 error between ``cov`` and the Matérn covariance.

    The ``u`` grid is regular, so the cell measure cancels in the ratio.
    """
    s_points = as_points(s_points)
    true = matern_cov(params, np.linalg.norm(offsets, axis=1))
    denom = np.sum(true**2)
    eps = np.empty(s_points.shape[0])
    for i, s in enumerate(s_points):
        approx = np.asarray(cov(s[None, :], s + offsets)).ravel()
        eps[i] = np.sum((true - approx) ** 2) / denom
    return eps


def covariance_error(cov, params, lower, upper, grid=EpsGrid()):
    """Mean of the covariance error over the ``s`` lattice of ``grid``."""
    s = grid.s_points(lower, upper)
    offsets = grid.u_offsets(params.range, params.d)
    return float(np.mean(epsilon_at(cov, params, s, offsets)))


def kriging_error(approx, optimal):
    a = np.asarray(getattr(approx, "predictions", approx), dtype=float)
    b = np.asarray(getattr(optimal, "predictions", optimal), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"prediction grids differ: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


@dataclass
class ReplicateOutcome:
    errors: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)


def _timed_krige(problem, repeats):
    results = [krige(problem) for _ in range(max(1, repeats))]
    t = Timings(
        step1=median(r.timings.step1 for r in results),
        step2=median(r.timings.step2 for r in results),
        step3=median(r.timings.step3 for r in results),
    )
    return results[0], t


def run_replicate(exp, replicate, methods, sizes=MethodSizes(), repeats=1, keep_predictions=False):
    """Krige one simulated replicate with every method; errors are against ``optimal``."""
    truth = simulate_truth(exp, replicate)
    p = exp.params
    out = ReplicateOutcome()
    reference = None
    for name in ("optimal",) + tuple(n for n in methods if n != "optimal"):
        try:
            method = make_method(name, p, exp.lower, exp.upper, sizes)
        except MethodSkipped as exc:
            out.skipped[name] = exc.reason
            continue
        problem = KrigingProblem(truth.obs_locs, truth.y, exp.sigma, truth.pred_locs, p, method)
        try:
            result, timings = _timed_krige(problem, repeats)
        except Exception as exc:  # noqa: BLE001  reported as an error row
            out.skipped[name] = f"error: {type(exc).__name__}: {exc}"
            if reference is None:
                break
            continue
        if reference is None:
            reference = result
        if name in methods:
            out.errors[name] = kriging_error(result, reference)
            out.timings[name] = timings
            if keep_predictions:
                out.predictions[name] = result.predictions
    out.truth = truth
    return out


def warmup():
    """Compile the sparse kernels so that the first timed run is not charged for it."""
    import scipy.sparse as sp

    a = sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(8, 8), format="csc")
    cholesky(a).solve(np.ones(8))
