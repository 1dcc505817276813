import numpy as np
import pytest

from robust_moments.data import GroupedDataset
from robust_moments.features import FunctionFeatures, LinearFeatures
from robust_moments.game import SolverConfig, build_linear_coefficients, solve
from robust_moments.oracle import (
    LinearBallOracles,
    OracleGameState,
    ftl_adversary_update,
    oracle_best_response,
    oracle_solve,
)


def _dataset(rng, M=2, n=10, d=2, y_scale=1.0):
    xs = [rng.normal(size=(n, d)) for _ in range(M)]
    ys = [y_scale * rng.normal(size=n) for _ in range(M)]
    return GroupedDataset(tuple(xs), tuple(ys))


def _state(ds, betas=None, alpha_bar=None):
    sizes = ds.group_sizes
    return OracleGameState(
        w=np.full(ds.n_groups, 1.0 / ds.n_groups),
        betas=betas or [np.zeros(n) for n in sizes],
        alpha_bar=alpha_bar or [np.zeros(n) for n in sizes],
    )


def test_zero_betas_give_zero_hypothesis():
    rng = np.random.default_rng(0)
    ds = _dataset(rng)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=3.0)
    evals = oracle_best_response(_state(ds), oracles, ds)
    for e in evals:
        assert np.allclose(e, 0.0)


def test_linear_opt_matches_ball_argmin_oracle():
    rng = np.random.default_rng(1)
    ds = _dataset(rng, M=1, n=8, d=3)
    A = 2.5
    oracles = LinearBallOracles(ds, LinearFeatures(dim=3), norm_bound=A)
    beta = [rng.normal(size=8)]
    h = oracles.linear_opt(np.ones(1), beta)
    # closed form: alpha = A u / ||u|| with u = Phi' beta / n
    u = ds.xs[0].T @ beta[0] / 8.0
    assert np.allclose(h.coef, A * u / np.linalg.norm(u))

    def objective(coef):
        return -np.dot(ds.xs[0] @ coef, beta[0]) / 8.0

    ours = objective(h.coef)
    for _ in range(2000):
        cand = rng.normal(size=3)
        cand = A * cand / np.linalg.norm(cand)
        assert ours <= objective(cand) + 1e-12


def test_symmetric_groups_get_identical_blocks():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 2))
    y = rng.normal(size=6)
    ds = GroupedDataset((x, x.copy()), (y, y.copy()))
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=2.0)
    beta = rng.normal(size=6)
    state = _state(ds, betas=[beta, beta.copy()])
    evals = oracle_best_response(state, oracles, ds)
    assert np.allclose(evals[0], evals[1])


def test_ftl_perfect_fit_returns_zero():
    rng = np.random.default_rng(3)
    ds = _dataset(rng, M=2, n=7)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=2.0)
    state = _state(ds, alpha_bar=[y.copy() for y in ds.ys])
    betas = ftl_adversary_update(state, oracles, ds)
    for b in betas:
        assert np.allclose(b, 0.0, atol=1e-10)


def test_ftl_constant_class_returns_residual_mean():
    rng = np.random.default_rng(4)
    ds = _dataset(rng, M=1, n=9)
    const = FunctionFeatures(lambda X: np.ones((X.shape[0], 1)), dim=1)
    oracles = LinearBallOracles(ds, const, norm_bound=5.0)
    state = _state(ds)
    betas = ftl_adversary_update(state, oracles, ds)
    assert np.allclose(betas[0], ds.ys[0].mean())


def test_ftl_matches_normal_equations_oracle():
    rng = np.random.default_rng(5)
    ds = _dataset(rng, M=2, n=12, d=3)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=3), norm_bound=4.0)
    alpha_bar = [rng.normal(size=12) for _ in range(2)]
    state = _state(ds, alpha_bar=alpha_bar)
    betas = ftl_adversary_update(state, oracles, ds)
    for j in range(2):
        Phi = ds.xs[j]
        target = ds.ys[j] - alpha_bar[j]
        coef = np.linalg.solve(Phi.T @ Phi, Phi.T @ target)
        assert np.allclose(betas[j], Phi @ coef, atol=1e-8)


def test_oracle_solve_single_iteration_is_best_response_to_zero():
    rng = np.random.default_rng(6)
    ds = _dataset(rng)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=2.0)
    res = oracle_solve(ds, oracles, SolverConfig(iters=1))
    assert np.allclose(res.alpha_bar, 0.0)
    assert res.oracle_calls["linear_opt"] == 1
    assert res.oracle_calls["regression"] == ds.n_groups


def test_oracle_call_accounting():
    rng = np.random.default_rng(7)
    ds = _dataset(rng, M=3)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=2.0)
    T = 25
    res = oracle_solve(ds, oracles, SolverConfig(iters=T))
    assert res.oracle_calls["linear_opt"] == T
    assert res.oracle_calls["regression"] == 3 * T
    assert res.oracle_calls["certificate_linear_opt"] == 1
    assert res.oracle_calls["certificate_regression"] == 3
    # the oracle object saw every call, loop plus certificate
    assert oracles.n_linear_opt_calls == T + 1
    assert oracles.n_regression_calls == 3 * T + 3


def test_incremental_average_matches_batch():
    rng = np.random.default_rng(8)
    ds = _dataset(rng, M=2, n=6)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=2.0)
    res = oracle_solve(
        ds, oracles, SolverConfig(iters=40), record_learner_evals=True
    )
    for j in range(2):
        batch = np.mean([evals[j] for evals in res.learner_evals], axis=0)
        assert np.allclose(res.per_group_alpha[j], batch, atol=1e-12)


def test_gap_decreases_with_iterations():
    rng = np.random.default_rng(9)
    ds = _dataset(rng, M=2, n=10, y_scale=0.5)
    oracles = LinearBallOracles(ds, LinearFeatures(dim=2), norm_bound=3.0)
    gap_small = oracle_solve(ds, oracles, SolverConfig(iters=100)).gap
    gap_large = oracle_solve(ds, oracles, SolverConfig(iters=10_000)).gap
    assert gap_small >= -1e-8 and gap_large >= -1e-8
    assert gap_large < gap_small


def test_single_group_matches_moment_solver_closely():
    rng = np.random.default_rng(10)
    ds = _dataset(rng, M=1, n=16, d=2)
    fm = LinearFeatures(dim=2)
    gc = build_linear_coefficients(ds, fm, lam=0.0, mu=0.0, norm_bound=50.0)
    moment_obj = float(gc.payoffs(solve(gc, SolverConfig(iters=1)).alpha_bar).max())
    oracles = LinearBallOracles(ds, fm, norm_bound=50.0)
    res = oracle_solve(ds, oracles, SolverConfig(iters=30_000))
    assert abs(res.upper_value - moment_obj) <= 1e-6


def test_cross_solver_agreement_small_instances():
    rng = np.random.default_rng(11)
    for trial in range(5):
        ds = _dataset(rng, M=int(rng.integers(2, 4)), n=12, d=2, y_scale=0.5)
        fm = LinearFeatures(dim=2)
        gc = build_linear_coefficients(ds, fm, lam=0.0, mu=0.0, norm_bound=25.0)
        mres = solve(gc, SolverConfig(iters=4000))
        moment_obj = float(gc.payoffs(mres.alpha_bar).max())
        oracles = LinearBallOracles(ds, fm, norm_bound=25.0)
        ores = oracle_solve(ds, oracles, SolverConfig(iters=4000))
        tol = mres.gap + ores.gap + 1e-6
        assert abs(ores.upper_value - moment_obj) <= tol
