"""Oracle-driven no-regret solver for general convex hypothesis spaces.

The learner answers each round with one linear-optimization oracle call; the
adversary keeps per-group test-function evaluations updated by follow the
leader (one regression oracle call per group per round) and mixes groups with
multiplicative weights. Reference oracles for the norm-ball linear class ship
with the module so the dynamics are testable end to end.

Oracle protocol: an object with

``linear_opt(w, betas) -> hypothesis``
    returns ``h`` minimizing ``-sum_j w_j mean_i(h(X_ij) * betas[j][i])`` over
    the hypothesis class; ``hypothesis`` must be callable on covariate stacks.

``regression(j, targets) -> hypothesis``
    returns ``f`` in the test class minimizing the group-``j`` squared error
    to ``targets``.

The caller is responsible for supplying a test class that spans the
hypothesis differences (the dynamics certify gaps only against it).
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .game import SolverConfig, mw_update


@dataclass
class OracleGameState:
    """Adversary weights, test evaluations, and the running learner average."""

    w: np.ndarray
    betas: list
    alpha_bar: list
    t: int = 0


class LinearHypothesis:
    """Featurized linear function ``x -> coef . phi(x)``."""

    def __init__(self, coef, feature_map):
        self.coef = np.asarray(coef, dtype=float)
        self.feature_map = feature_map

    def __call__(self, X):
        return self.feature_map.transform(X) @ self.coef


class LinearBallOracles:
    """Exact reference oracles for the norm-ball linear hypothesis class.

    The linear-optimization oracle returns the ball extreme point
    ``A u / ||u||`` with ``u = sum_j (w_j / n_j) Phi_j' beta_j``; the
    regression oracle returns the unconstrained least-squares fit of the
    targets in the same feature class. Calls are counted for the oracle-budget
    accounting.
    """

    def __init__(self, ds, feature_map, norm_bound):
        self.feature_map = feature_map
        self.norm_bound = float(norm_bound)
        self._feats = [feature_map.transform(x) for x in ds.xs]
        self._pinvs = [np.linalg.pinv(f) for f in self._feats]
        self.n_linear_opt_calls = 0
        self.n_regression_calls = 0

    def linear_opt(self, w, betas):
        self.n_linear_opt_calls += 1
        u = np.zeros(self.feature_map.dim)
        for wj, feats, beta in zip(w, self._feats, betas):
            u += (wj / feats.shape[0]) * (feats.T @ beta)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return LinearHypothesis(np.zeros_like(u), self.feature_map)
        return LinearHypothesis(self.norm_bound * u / norm, self.feature_map)

    def regression(self, j, targets):
        self.n_regression_calls += 1
        coef = self._pinvs[j] @ np.asarray(targets, dtype=float)
        return LinearHypothesis(coef, self.feature_map)


def oracle_best_response(state, oracles, ds):
    """Learner evaluations of the oracle's best response to ``(w, betas)``."""
    h = oracles.linear_opt(state.w, state.betas)
    return [h(x) for x in ds.xs]


def ftl_adversary_update(state, oracles, ds):
    """Follow-the-leader refit of every group's test function.

    Group ``j``'s new evaluations are the regression-oracle fit to the
    residuals ``y_j - alpha_bar_j`` of the running learner average.
    """
    betas = []
    for j, (x, y) in enumerate(zip(ds.xs, ds.ys)):
        f = oracles.regression(j, y - state.alpha_bar[j])
        betas.append(f(x))
    return betas


@dataclass
class OracleSolveResult:
    """Averaged oracle-game iterates with certificate and call accounting."""

    alpha_bar: np.ndarray          # pooled averaged learner evaluations
    per_group_alpha: list
    w_bar: np.ndarray
    group_objectives: np.ndarray   # (T, M) adversary payoffs per iteration
    gap: float
    upper_value: float
    lower_value: float
    hypothesis_coef: np.ndarray = None
    oracle_calls: dict = field(default_factory=dict)
    wallclock: dict = field(default_factory=dict)
    learner_evals: list = None

    @property
    def worst_group_objective(self):
        return self.upper_value


def oracle_solve(ds, oracles, config=None, record_learner_evals=False):
    """Run the oracle-based dynamics for ``config.iters`` rounds.

    Per round: one linear-optimization call for the learner's best response,
    then one regression call per group for the follow-the-leader adversary,
    then a multiplicative-weights step on the per-group payoffs
    ``(2 (y_j - alpha_j) . beta_j - ||beta_j||^2) / n_j``.

    The duality gap compares the true adversarial value at the averaged
    learner evaluations against the best response to the adversary's
    empirical mixed strategy (one extra oracle sweep, counted separately).
    """
    config = config or SolverConfig()
    M = ds.n_groups
    T = config.iters
    sizes = ds.group_sizes
    eta = config.eta
    if eta is None:
        eta = math.sqrt(math.log(max(M, 2)) / T)

    w = np.full(M, 1.0 / M)
    betas = [np.zeros(n) for n in sizes]
    alpha_bar = [np.zeros(n) for n in sizes]
    state = OracleGameState(w=w, betas=betas, alpha_bar=alpha_bar, t=0)

    w_sum = np.zeros(M)
    group_objectives = np.empty((T, M))
    mixed_beta = [np.zeros(n) for n in sizes]   # sum_t w_tj beta_tj
    mixed_beta_sq = np.zeros(M)                 # sum_t w_tj ||beta_tj||^2
    coef_sum = None
    payoff_bound = 0.0
    history = [] if record_learner_evals else None

    calls_before = (oracles.n_linear_opt_calls, oracles.n_regression_calls)
    t0 = time.perf_counter()
    for t in range(T):
        h = oracles.linear_opt(state.w, state.betas)
        alphas = [h(x) for x in ds.xs]
        if hasattr(h, "coef"):
            coef_sum = h.coef if coef_sum is None else coef_sum + h.coef
        if history is not None:
            history.append(alphas)
        for j in range(M):
            state.alpha_bar[j] += (alphas[j] - state.alpha_bar[j]) / (t + 1)
            mixed_beta[j] += state.w[j] * state.betas[j]
        mixed_beta_sq += state.w * np.array(
            [float(b @ b) for b in state.betas]
        )
        w_sum += state.w
        state.t = t + 1

        new_betas = ftl_adversary_update(state, oracles, ds)
        payoffs = np.array(
            [
                (2.0 * (ds.ys[j] - alphas[j]) @ new_betas[j]
                 - new_betas[j] @ new_betas[j]) / sizes[j]
                for j in range(M)
            ]
        )
        group_objectives[t] = payoffs
        payoff_bound = max(payoff_bound, float(np.abs(payoffs).max()), 1e-300)
        state.betas = new_betas
        state.w = mw_update(state.w, payoffs / payoff_bound, eta,
                            config.payoff_clip)
    t1 = time.perf_counter()

    loop_linear = oracles.n_linear_opt_calls - calls_before[0]
    loop_regression = oracles.n_regression_calls - calls_before[1]
    assert loop_linear == T and loop_regression == M * T, (
        f"oracle budget violated: {loop_linear} linear-opt and "
        f"{loop_regression} regression calls over {T} iterations"
    )

    w_bar = w_sum / T
    w_bar = np.clip(w_bar, 0.0, None)
    w_bar /= w_bar.sum()

    # Upper side: exact adversarial value at alpha_bar, one regression per group.
    upper_terms = np.empty(M)
    for j in range(M):
        resid = ds.ys[j] - state.alpha_bar[j]
        beta_star = oracles.regression(j, resid)(ds.xs[j])
        upper_terms[j] = (2.0 * resid @ beta_star - beta_star @ beta_star) / sizes[j]
    upper = float(upper_terms.max())

    # Lower side: best response to the empirical adversary mixture.
    c_bar = [b / T for b in mixed_beta]
    s_bar = mixed_beta_sq / T
    h_star = oracles.linear_opt(np.ones(M), c_bar)
    lower = 0.0
    for j in range(M):
        a_star = h_star(ds.xs[j])
        lower += (2.0 * (ds.ys[j] - a_star) @ c_bar[j] - s_bar[j]) / sizes[j]
    gap = upper - float(lower)
    t2 = time.perf_counter()

    return OracleSolveResult(
        alpha_bar=np.concatenate(state.alpha_bar),
        per_group_alpha=list(state.alpha_bar),
        w_bar=w_bar,
        group_objectives=group_objectives,
        gap=gap,
        upper_value=upper,
        lower_value=float(lower),
        hypothesis_coef=None if coef_sum is None else coef_sum / T,
        oracle_calls={
            "linear_opt": loop_linear,
            "regression": loop_regression,
            "certificate_linear_opt": 1,
            "certificate_regression": M,
        },
        wallclock={"game_loop": t1 - t0, "certificate": t2 - t1},
        learner_evals=history,
    )
