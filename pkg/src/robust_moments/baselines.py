"""groupDRO and minmax-regret (MRO) baselines over explicit feature classes.

Both run multiplicative weights over groups against a closed-form weighted
ridge learner. The implementations are deliberately straightforward: every
iteration rebuilds the weighted normal equations from the design matrix, and
MRO's per-group minimum losses come from one up-front ERM sweep (timed
separately). This keeps the per-iteration cost growing with the number of
groups, which is exactly the behavior the runtime benchmark measures.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .game import SolverConfig, mw_update

BASELINE_KINDS = ("dro", "mro")


@dataclass
class BaselineResult:
    """Averaged baseline iterates, trace, and gap certificate.

    ``erm_losses`` holds MRO's per-group minimum empirical square losses
    (``None`` for groupDRO). ``group_objectives`` traces the per-iteration MW
    payoffs: plain group losses for groupDRO, penalized regrets for MRO.
    """

    alpha_bar: np.ndarray
    w_bar: np.ndarray
    erm_losses: np.ndarray
    group_objectives: np.ndarray
    gap: float
    wallclock: dict = field(default_factory=dict)


def _ridge_solve(G, rhs, ridge, n_scale, jitter, what):
    mat = G + ridge * n_scale * np.eye(G.shape[0])
    try:
        sol = np.linalg.solve(mat, rhs)
        if np.all(np.isfinite(sol)) and np.linalg.norm(
            mat @ sol - rhs
        ) <= 1e-6 * max(np.linalg.norm(rhs), 1.0):
            return sol
    except np.linalg.LinAlgError:
        pass
    warnings.warn(
        f"singular normal equations in {what}; adding jitter {jitter:g}",
        RuntimeWarning,
    )
    scale = max(np.trace(mat) / mat.shape[0], 1.0)
    return np.linalg.solve(mat + jitter * scale * np.eye(mat.shape[0]), rhs)


def group_erm(ds, feature_map, ridge=0.0, jitter=1e-10):
    """Per-group ridge ERM: coefficients and unpenalized empirical losses.

    Minimizes ``mean((y - Phi a)^2) + ridge ||a||^2`` on each group and
    reports the fitted coefficient alongside its unpenalized mean square loss.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    M = ds.n_groups
    alphas = np.empty((M, feature_map.dim))
    losses = np.empty(M)
    for j in range(M):
        Phi = feature_map.transform(ds.xs[j])
        y = ds.ys[j]
        n = Phi.shape[0]
        alphas[j] = _ridge_solve(
            Phi.T @ Phi, Phi.T @ y, ridge, n, jitter, f"group {j} ERM"
        )
        resid = y - Phi @ alphas[j]
        losses[j] = float(resid @ resid) / n
    return alphas, losses


def solve_baseline(kind, ds, feature_map, config=None, ridge=0.0):
    """Run groupDRO (``kind='dro'``) or MRO (``kind='mro'``).

    MW payoffs are the per-group mean square losses, shifted for MRO by the
    ridge-penalized per-group minima so that every payoff is nonnegative.
    The learner best-responds with the weighted ridge solution; averaged
    iterates are returned with a duality-gap certificate computed by one
    extra best response at ``w_bar``.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"kind must be one of {BASELINE_KINDS}, got {kind!r}")
    config = config or SolverConfig()
    M = ds.n_groups
    T = config.iters
    eta = config.eta
    if eta is None:
        eta = math.sqrt(math.log(max(M, 2)) / T)

    t0 = time.perf_counter()
    feats = [feature_map.transform(x) for x in ds.xs]
    stacked = np.vstack(feats)
    stacked_y = np.concatenate(ds.ys)
    sizes = ds.group_sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    row_weights = np.empty(stacked.shape[0])
    d = stacked.shape[1]
    t_featurize = time.perf_counter() - t0

    erm_losses = None
    payoff_shift = np.zeros(M)
    t_erm = 0.0
    if kind == "mro":
        t0 = time.perf_counter()
        erm_alphas, erm_losses = group_erm(ds, feature_map, ridge=ridge)
        # shift by the penalized minima so regret payoffs cannot go negative
        payoff_shift = erm_losses + ridge * np.einsum(
            "md,md->m", erm_alphas, erm_alphas
        )
        t_erm = time.perf_counter() - t0

    def learner_response(w):
        # naive weighted least squares: rebuild the normal equations from the
        # full design matrix on every call
        for j in range(M):
            row_weights[offsets[j] : offsets[j + 1]] = w[j] / sizes[j]
        Xw = stacked * row_weights[:, None]
        G = stacked.T @ Xw
        rhs = Xw.T @ stacked_y
        return _ridge_solve(G, rhs, ridge, 1.0, config.ridge_jitter,
                            f"{kind} weighted least squares")

    def payoffs_at(alpha):
        resid = stacked_y - stacked @ alpha
        sq = resid * resid
        losses = np.add.reduceat(sq, offsets[:-1]) / sizes
        if kind == "dro":
            return losses
        return losses + ridge * float(alpha @ alpha) - payoff_shift

    w = np.full(M, 1.0 / M)
    alpha_sum = np.zeros(d)
    w_sum = np.zeros(M)
    group_objectives = np.empty((T, M))
    payoff_bound = 0.0

    t0 = time.perf_counter()
    for t in range(T):
        alpha = learner_response(w)
        p = payoffs_at(alpha)
        group_objectives[t] = p
        alpha_sum += alpha
        w_sum += w
        payoff_bound = max(payoff_bound, float(np.abs(p).max()), 1e-300)
        w = mw_update(w, p / payoff_bound, eta, config.payoff_clip)
    alpha_bar = alpha_sum / T
    w_bar = w_sum / T
    w_bar = np.clip(w_bar, 0.0, None)
    w_bar /= w_bar.sum()
    alpha_star = learner_response(w_bar)
    gap = float(payoffs_at(alpha_bar).max() - w_bar @ payoffs_at(alpha_star))
    t_loop = time.perf_counter() - t0

    return BaselineResult(
        alpha_bar=alpha_bar,
        w_bar=w_bar,
        erm_losses=erm_losses,
        group_objectives=group_objectives,
        gap=gap,
        wallclock={"featurize": t_featurize, "erm": t_erm, "game_loop": t_loop},
    )
