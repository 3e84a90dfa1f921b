import numpy as np
import pytest
import scipy.sparse as sp

from maternapprox.basis import BasisSpec, BasisSystem, build_basis, evaluate_basis
from maternapprox.convolution import convolution_basis, make_convolution, regular_lattice
from maternapprox.kriging import (
    CapExceeded,
    Convolution,
    KrigingProblem,
    Markov,
    Optimal,
    Taper,
    krige,
)
from maternapprox.matern import MaternParams, dense_cov_matrix, matern_cov, pairwise_distances
from maternapprox.precision import build_Q
from maternapprox.sparse import cholesky
from maternapprox.taper import TaperSpec, wendland

P2 = MaternParams.from_range(2.0, 1.5)


def rel_inf(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def small_data(rng, m=100, k=30, box=5.0):
    obs = rng.uniform(0, box, (m, 2))
    pred = rng.uniform(0, box, (k, 2))
    y = rng.standard_normal(m)
    return obs, pred, y


def all_methods(box=5.0):
    spec = BasisSpec.on_box("spline", (0, 0), (box, box), 7)
    return [
        Optimal(),
        Markov(spec),
        Markov(BasisSpec.on_box("db3", (0, 0), (box, box), 8)),
        Convolution(make_convolution(P2, regular_lattice((0, 0), (box, box), 7))),
        Taper(TaperSpec("wendland2", 1.5)),
    ]


# optimal


def test_optimal_hand_example_1d():
    # nu = 1/2 in 1-d is exponential: r(h) = exp(-kappa h) with unit variance
    p = MaternParams.from_range(0.5, 2.0, d=1)
    kappa = 1.0 / 1.0  # sqrt(8 * 0.5) / 2
    assert p.kappa == pytest.approx(kappa, rel=1e-15)
    s = np.array([0.0, 1.0, 2.5, 4.0])
    y = np.array([0.3, -1.2, 0.8, 0.1])
    t = np.array([0.5, 3.0])
    sigma = 0.2
    S = np.exp(-np.abs(s[:, None] - s[None, :])) + sigma**2 * np.eye(4)
    M = np.exp(-np.abs(t[:, None] - s[None, :]))
    want = M @ np.linalg.solve(S, y)
    got = krige(KrigingProblem(s, y, sigma, t, p)).predictions
    assert np.abs(got - want).max() <= 1e-12


def test_optimal_interpolation_limit(rng):
    obs, _, y = small_data(rng, m=40)
    r = krige(KrigingProblem(obs, y, 1e-6, obs[:5], P2))
    assert np.abs(r.predictions - y[:5]).max() <= 1e-3


def test_optimal_zero_data(rng):
    obs, pred, _ = small_data(rng)
    r = krige(KrigingProblem(obs, np.zeros(100), 0.1, pred, P2), variance=True)
    assert np.array_equal(r.predictions, np.zeros(30))
    assert np.all(r.variance < r.prior_variance)
    assert np.all(r.variance >= 0)


def test_optimal_streams_many_prediction_rows(rng):
    obs, _, y = small_data(rng, m=50)
    pred = rng.uniform(0, 5, (700, 2))
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2))
    S = dense_cov_matrix(P2, obs) + 0.01 * np.eye(50)
    want = dense_cov_matrix(P2, pred, obs) @ np.linalg.solve(S, y)
    assert rel_inf(r.predictions, want) <= 1e-10


def test_optimal_cap(rng):
    obs, pred, y = small_data(rng, m=20)
    with pytest.raises(CapExceeded):
        krige(KrigingProblem(obs, y, 0.1, pred, P2, Optimal(cap=10)))


def test_problem_validation():
    with pytest.raises(ValueError):
        KrigingProblem(np.zeros((2, 2)), np.zeros(2), 0.0, np.zeros((1, 2)), P2)
    with pytest.raises(ValueError):
        KrigingProblem(np.zeros((2, 2)), np.zeros(3), 0.1, np.zeros((1, 2)), P2)
    with pytest.raises(ValueError):
        KrigingProblem(np.zeros((0, 2)), np.zeros(0), 0.1, np.zeros((1, 2)), P2)


# low rank


def markov_dense_oracles(spec, p, obs, pred, y, sigma):
    Q = build_Q(build_basis(spec), p).Q.toarray()
    B1 = evaluate_basis(spec, obs).toarray()
    B2 = evaluate_basis(spec, pred).toarray()
    Qinv = np.linalg.inv(Q)
    lowrank = B2 @ np.linalg.inv(Q + B1.T @ B1 / sigma**2) @ B1.T @ y / sigma**2
    woodbury = (B2 @ Qinv @ B1.T) @ np.linalg.solve(B1 @ Qinv @ B1.T + sigma**2 * np.eye(len(y)), y)
    return lowrank, woodbury


def test_markov_matches_dense_formulas(rng):
    obs, pred, y = small_data(rng)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7)
    assert spec.n == 49
    got = krige(KrigingProblem(obs, y, 0.1, pred, P2, Markov(spec))).predictions
    lowrank, woodbury = markov_dense_oracles(spec, P2, obs, pred, y, 0.1)
    assert rel_inf(got, lowrank) <= 1e-9
    assert rel_inf(got, woodbury) <= 1e-8


def test_markov_exact_mass_matrix_path(rng):
    obs, pred, y = small_data(rng)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7)
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2, Markov(spec, "exact")))
    Q = build_Q(build_basis(spec), P2, "exact").Q
    B1 = evaluate_basis(spec, obs).toarray()
    B2 = evaluate_basis(spec, pred).toarray()
    want = B2 @ np.linalg.solve(Q + B1.T @ B1 / 0.01, B1.T @ y / 0.01)
    assert rel_inf(r.predictions, want) <= 1e-9


def test_convolution_matches_dense_formulas(rng):
    obs, pred, y = small_data(rng)
    spec = make_convolution(P2, regular_lattice((0, 0), (5, 5), 7))
    got = krige(KrigingProblem(obs, y, 0.1, pred, P2, Convolution(spec))).predictions
    B1, B2 = convolution_basis(spec, obs), convolution_basis(spec, pred)
    a = spec.weight_variance
    lowrank = B2 @ np.linalg.inv(np.eye(49) / a + B1.T @ B1 / 0.01) @ B1.T @ y / 0.01
    woodbury = a * B2 @ B1.T @ np.linalg.solve(a * B1 @ B1.T + 0.01 * np.eye(100), y)
    assert rel_inf(got, lowrank) <= 1e-9
    assert rel_inf(got, woodbury) <= 1e-8


def test_lowrank_large_noise_shrinks_to_zero(rng):
    obs, _, y = small_data(rng)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7)
    r = krige(KrigingProblem(obs, y, 1e6, obs, P2, Markov(spec)))
    assert np.abs(r.predictions).max() <= 1e-9


def _markov_predict(Q, B1, B2, y, sigma):
    H = sp.csc_matrix(Q + (B1.T @ B1) / sigma**2)
    return B2 @ cholesky(H).solve(B1.T @ y / sigma**2)


def test_markov_basis_rescaling_invariance(rng):
    obs, pred, y = small_data(rng)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7, expand=1.0)
    b = build_basis(spec)
    base = krige(KrigingProblem(obs, y, 0.1, pred, P2, Markov(spec))).predictions
    c = 3.7
    scaled = BasisSystem(spec, c * c * b.C, c * c * b.G, c * c * b.C_lumped)
    Q = build_Q(scaled, P2).Q
    B1 = c * evaluate_basis(spec, obs)
    B2 = c * evaluate_basis(spec, pred)
    assert rel_inf(_markov_predict(Q, B1, B2, y, 0.1), base) <= 1e-10


def test_markov_basis_permutation_invariance(rng):
    obs, pred, y = small_data(rng)
    spec = BasisSpec.on_box("spline", (0, 0), (5, 5), 7, expand=1.0)
    base = krige(KrigingProblem(obs, y, 0.1, pred, P2, Markov(spec))).predictions
    Q = build_Q(build_basis(spec), P2).Q
    perm = rng.permutation(Q.shape[0])
    Qp = Q[perm][:, perm]
    B1 = evaluate_basis(spec, obs)[:, perm]
    B2 = evaluate_basis(spec, pred)[:, perm]
    assert rel_inf(_markov_predict(Qp, B1, B2, y, 0.1), base) <= 1e-12


# tapered


def test_taper_matches_dense_formula(rng):
    obs, pred, y = small_data(rng, m=300, k=60)
    spec = TaperSpec("wendland2", 0.9)
    got = krige(KrigingProblem(obs, y, 0.1, pred, P2, Taper(spec))).predictions
    D = pairwise_distances(obs, obs)
    S = matern_cov(P2, D) * wendland(spec, D) + 0.01 * np.eye(300)
    Dp = pairwise_distances(pred, obs)
    M = matern_cov(P2, Dp) * wendland(spec, Dp)
    want = M @ np.linalg.solve(S, y)
    assert rel_inf(got, want) <= 1e-10


def test_unit_taper_over_diameter_equals_optimal(rng):
    obs, pred, y = small_data(rng)
    opt = krige(KrigingProblem(obs, y, 0.1, pred, P2)).predictions
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2, Taper(TaperSpec("wendland1", 10.0), unit_taper=True)))
    assert rel_inf(r.predictions, opt) <= 1e-10


def test_taper_isolated_point_is_zero(rng):
    obs, _, y = small_data(rng)
    pred = np.array([[20.0, 20.0], [2.5, 2.5]])
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2, Taper(TaperSpec("wendland2", 0.5))))
    assert r.predictions[0] == 0.0
    assert r.predictions[1] != 0.0
    assert r.meta["theta"] == 0.5 and r.meta["nnz_L"] > 0


def test_taper_validity_enforced(rng):
    obs, pred, y = small_data(rng, m=20)
    p3 = MaternParams.from_range(3.0, 1.0)
    with pytest.raises(ValueError):
        krige(KrigingProblem(obs, y, 0.1, pred, p3, Taper(TaperSpec("wendland2", 0.5))))
    krige(KrigingProblem(obs, y, 0.1, pred, p3, Taper(TaperSpec("wendland2", 0.5), override=True)))


# invariants over every method


@pytest.mark.parametrize("index", range(5))
def test_linearity(rng, index):
    method = all_methods()[index]
    obs, pred, y1 = small_data(rng)
    y2 = rng.standard_normal(100)
    a, b = 1.7, -0.4

    def run(y):
        return krige(KrigingProblem(obs, y, 0.1, pred, P2, method)).predictions

    combo, p1, p2 = run(a * y1 + b * y2), run(y1), run(y2)
    assert np.abs(combo - (a * p1 + b * p2)).max() <= 1e-10 * max(1.0, np.abs(combo).max())


@pytest.mark.parametrize("index", range(5))
def test_observation_permutation_invariance(rng, index):
    method = all_methods()[index]
    obs, pred, y = small_data(rng)
    perm = rng.permutation(100)
    a = krige(KrigingProblem(obs, y, 0.1, pred, P2, method)).predictions
    b = krige(KrigingProblem(obs[perm], y[perm], 0.1, pred, P2, method)).predictions
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


@pytest.mark.parametrize("index", range(5))
def test_variance_bounds(rng, index):
    method = all_methods()[index]
    obs, pred, y = small_data(rng)
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2, method), variance=True)
    assert np.all(r.variance >= -1e-10)
    assert np.all(r.variance <= r.prior_variance + 1e-8)


@pytest.mark.parametrize("index", range(5))
def test_timings_recorded(rng, index):
    method = all_methods()[index]
    obs, pred, y = small_data(rng)
    r = krige(KrigingProblem(obs, y, 0.1, pred, P2, method))
    t = r.timings
    assert min(t.step1, t.step2, t.step3) >= 0
    assert t.step2 + t.step3 <= t.total


def test_timings_grow_with_m(rng):
    def median_total(m):
        obs = rng.uniform(0, 5, (m, 2))
        y = rng.standard_normal(m)
        pred = rng.uniform(0, 5, (100, 2))
        runs = [krige(KrigingProblem(obs, y, 0.1, pred, P2)).timings.total for _ in range(5)]
        return float(np.median(runs))

    assert median_total(100) <= median_total(1600)
