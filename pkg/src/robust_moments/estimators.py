"""Scikit-learn style regressors wrapping the group-robust solvers.

All estimators take pooled arrays ``fit(X, y, groups)`` where ``groups``
labels each sample, featurize with a shared Nystroem RBF map (or a caller
supplied feature map), and expose the fitted coefficient vector, adversary
weights, and duality gap as trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .baselines import solve_baseline
from .data import GroupedDataset
from .features import fit_nystrom
from .game import SolverConfig, build_linear_coefficients, predict, solve


class _GroupGameRegressor(BaseEstimator, RegressorMixin):
    """Shared featurization and fit plumbing for the group-robust methods."""

    def __init__(self, gamma=1.0, n_landmarks=100, rank=None, iters=2000,
                 eta=None, payoff_clip=1.0, feature_map=None, random_state=None):
        self.gamma = gamma
        self.n_landmarks = n_landmarks
        self.rank = rank
        self.iters = iters
        self.eta = eta
        self.payoff_clip = payoff_clip
        self.feature_map = feature_map
        self.random_state = random_state

    def _prepare(self, X, y, groups):
        if groups is None:
            groups = np.zeros(np.asarray(X).shape[0], dtype=int)
        ds = GroupedDataset.from_arrays(X, y, groups)
        if self.feature_map is not None:
            fm = self.feature_map
        else:
            n_landmarks = min(self.n_landmarks, ds.n_samples)
            fm = fit_nystrom(
                ds,
                gamma=self.gamma,
                n_landmarks=n_landmarks,
                rank=self.rank,
                seed=self.random_state,
            )
        self.feature_map_ = fm
        self.n_features_in_ = ds.covariate_dim
        return ds, fm

    def _solver_config(self):
        return SolverConfig(
            iters=self.iters, eta=self.eta, payoff_clip=self.payoff_clip
        )

    def predict(self, X):
        if not hasattr(self, "alpha_"):
            raise AttributeError(f"{type(self).__name__} is not fitted")
        return predict(self.alpha_, self.feature_map_, np.asarray(X, dtype=float))


class AdversarialMomentRegressor(_GroupGameRegressor):
    """Worst-group adversarial-moment minimizer over a featurized class.

    Parameters
    ----------
    lam : test-function norm penalty (weight of ``||f||^2``).
    mu : hypothesis norm penalty (weight of ``||h||^2``).
    norm_bound : radius of the coefficient ball the learner plays in.
    a_n : multiplier of the quadratic moment penalty; 1 targets worst-group
        square-loss regret, smaller values trade toward multiaccuracy.
    iters, eta, payoff_clip : no-regret loop controls (``eta=None`` uses
        ``sqrt(log M / iters)``).
    gamma, n_landmarks, rank, random_state : Nystroem RBF featurization;
        ignored when ``feature_map`` is given.
    """

    def __init__(self, gamma=1.0, n_landmarks=100, rank=None, iters=2000,
                 eta=None, payoff_clip=1.0, feature_map=None, random_state=None,
                 lam=1e-3, mu=1e-8, norm_bound=100.0, a_n=1.0):
        super().__init__(
            gamma=gamma, n_landmarks=n_landmarks, rank=rank, iters=iters,
            eta=eta, payoff_clip=payoff_clip, feature_map=feature_map,
            random_state=random_state,
        )
        self.lam = lam
        self.mu = mu
        self.norm_bound = norm_bound
        self.a_n = a_n

    def fit(self, X, y, groups=None):
        ds, fm = self._prepare(X, y, groups)
        coeffs = build_linear_coefficients(
            ds, fm, lam=self.lam, mu=self.mu,
            norm_bound=self.norm_bound, a_n=self.a_n,
        )
        result = solve(coeffs, self._solver_config())
        self.coefficients_ = coeffs
        self.result_ = result
        self.alpha_ = result.alpha_bar
        self.group_weights_ = result.w_bar
        self.gap_ = result.gap
        return self


class _BaselineRegressor(_GroupGameRegressor):
    _kind = None

    def __init__(self, gamma=1.0, n_landmarks=100, rank=None, iters=2000,
                 eta=None, payoff_clip=1.0, feature_map=None, random_state=None,
                 ridge=1e-3):
        super().__init__(
            gamma=gamma, n_landmarks=n_landmarks, rank=rank, iters=iters,
            eta=eta, payoff_clip=payoff_clip, feature_map=feature_map,
            random_state=random_state,
        )
        self.ridge = ridge

    def fit(self, X, y, groups=None):
        ds, fm = self._prepare(X, y, groups)
        result = solve_baseline(
            self._kind, ds, fm, config=self._solver_config(), ridge=self.ridge
        )
        self.result_ = result
        self.alpha_ = result.alpha_bar
        self.group_weights_ = result.w_bar
        self.gap_ = result.gap
        if result.erm_losses is not None:
            self.erm_losses_ = result.erm_losses
        return self


class GroupDRORegressor(_BaselineRegressor):
    """Minimizes the worst-group square loss (multiplicative weights over groups)."""

    _kind = "dro"


class MinmaxRegretRegressor(_BaselineRegressor):
    """Minimizes the worst-group square-loss regret against per-group ERM."""

    _kind = "mro"
