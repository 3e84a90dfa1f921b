"""Fast end-to-end sanity checks run by ``maternapprox selftest``."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .basis import (
    DB3_LAMBDA,
    DB3_LAMBDA_EXACT,
    BasisSpec,
    build_basis,
    db3_connection_coefficients,
    evaluate_basis,
    spline_stencil,
)
from .kriging import KrigingProblem, Markov, Optimal, Taper, krige
from .matern import MaternParams, matern_cov
from .precision import build_Q
from .sparse import cholesky
from .taper import TaperSpec

__all__ = ["CHECKS", "run_selftest"]


def _db3_constants():
    lam = db3_connection_coefficients()
    err = np.max(np.abs(lam - np.asarray(DB3_LAMBDA_EXACT)))
    # the published digits are the closed form truncated
    digits = all(abs(a - b) < 1e-3 * max(1.0, abs(b)) for a, b in zip(DB3_LAMBDA, DB3_LAMBDA_EXACT))
    return err < 1e-10 and digits, f"max |Lambda - closed form| = {err:.2e}"


def _spline_stencil():
    c, g = spline_stencil(1)
    ok = np.allclose(c[:2], [2 / 3, 1 / 6], atol=1e-14) and np.allclose(g[:2], [2, -1], atol=1e-14)
    return ok, f"C = {c[:2]}, G = {g[:2]}"


def _sparse_cholesky():
    rng = np.random.default_rng(1)
    a = sp.random(300, 300, density=0.02, random_state=rng, format="csc")
    a = a @ a.T + sp.identity(300) * 5
    f = cholesky(a)
    b = rng.standard_normal(300)
    x = f.solve(b)
    res = np.max(np.abs(a @ x - b))
    return res < 1e-10, f"max residual {res:.2e}"


def _markov_oracle():
    rng = np.random.default_rng(2)
    p = MaternParams.from_range(1.0, 1.5, 2)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7)
    obs, pred = rng.uniform(0, 5, (100, 2)), rng.uniform(0, 5, (25, 2))
    y = rng.standard_normal(100)
    got = krige(KrigingProblem(obs, y, 0.1, pred, p, Markov(spec))).predictions
    Q = build_Q(build_basis(spec), p).Q.toarray()
    B1, B2 = evaluate_basis(spec, obs).toarray(), evaluate_basis(spec, pred).toarray()
    want = B2 @ np.linalg.solve(Q + B1.T @ B1 / 0.01, B1.T @ y / 0.01)
    err = np.max(np.abs(got - want)) / np.max(np.abs(want))
    return err < 1e-8, f"relative error {err:.2e}"


def _taper_degenerate():
    rng = np.random.default_rng(3)
    p = MaternParams.from_range(1.0, 1.0, 2)
    obs, pred = rng.uniform(0, 5, (80, 2)), rng.uniform(0, 5, (20, 2))
    y = rng.standard_normal(80)
    opt = krige(KrigingProblem(obs, y, 0.05, pred, p, Optimal())).predictions
    tap = krige(KrigingProblem(obs, y, 0.05, pred, p, Taper(TaperSpec("wendland1", 100.0), unit_taper=True)))
    err = np.max(np.abs(tap.predictions - opt))
    return err < 1e-10, f"max difference {err:.2e}"


def _unit_variance():
    ok = all(abs(matern_cov(MaternParams.from_range(nu, 0.7, 2), 0.0) - 1) < 1e-12 for nu in (0.5, 1, 2, 3))
    return ok, "r(0) = 1 for nu in {0.5, 1, 2, 3}"


CHECKS = (
    ("db3 connection coefficients", _db3_constants),
    ("spline m=1 stencil", _spline_stencil),
    ("sparse cholesky solve", _sparse_cholesky),
    ("markov kriging vs dense", _markov_oracle),
    ("unit taper equals optimal", _taper_degenerate),
    ("unit variance parametrization", _unit_variance),
)


def run_selftest(write=print):
    failed = 0
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return failed
