"""Metrics and small independent oracles used to audit the solvers.

The enumeration helpers operate on finite discrete (x, y) tables where
hypotheses and test functions are given by their per-sample value columns;
they are deliberately brute-force so they stay independent of the solver
code paths they check.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_vector


@dataclass(frozen=True)
class TestFunctionBall:
    """Linear test-function class ``{x -> b . phi(x) : ||b||_2 <= bound}``."""

    feature_map: object
    bound: float = 1.0

    __test__ = False  # keep pytest from collecting this as a test class

    def __post_init__(self):
        check_positive(self.bound, "bound")


@dataclass
class EvalReport:
    """Per-group and worst-group metrics of one fitted hypothesis."""

    group_sizes: np.ndarray
    square_loss: np.ndarray
    regret: np.ndarray
    multiaccuracy: np.ndarray
    mse_h0: np.ndarray = None
    gap: float = None
    fit_x: np.ndarray = None
    fit_h: np.ndarray = None

    def worst(self, metric):
        values = getattr(self, metric)
        idx = int(np.argmax(values))  # ties break to the lowest index
        return idx, float(values[idx])


def mse_to_h0(predict_fn, ground_truth, ds):
    """Per-group empirical mean of ``(h(x) - h0(x))^2`` (synthetic mode only)."""
    if ground_truth is None:
        raise ValueError("mse_to_h0 requires a ground truth (synthetic mode)")
    out = np.empty(ds.n_groups)
    for j, x in enumerate(ds.xs):
        diff = predict_fn(x) - ground_truth.conditional_mean(x, j)
        out[j] = float(np.mean(diff * diff))
    return out


def group_square_loss(predict_fn, ds):
    """Per-group empirical mean square loss of the hypothesis."""
    out = np.empty(ds.n_groups)
    for j, (x, y) in enumerate(zip(ds.xs, ds.ys)):
        resid = y - predict_fn(x)
        out[j] = float(np.mean(resid * resid))
    return out


def group_min_losses(ds, feature_map):
    """Exact per-group minimum square loss over the feature span (via lstsq)."""
    out = np.empty(ds.n_groups)
    for j, (x, y) in enumerate(zip(ds.xs, ds.ys)):
        Phi = feature_map.transform(x)
        coef, *_ = np.linalg.lstsq(Phi, y, rcond=None)
        resid = y - Phi @ coef
        out[j] = float(resid @ resid) / Phi.shape[0]
    return out


def multiaccuracy_error(predict_fn, ds, ball):
    """Per-group sup over the linear ball of ``|mean((y - h(x)) f(x))|``.

    The sup has the closed form ``bound * ||mean((y - h) phi(x))||_2``.
    """
    out = np.empty(ds.n_groups)
    for j, (x, y) in enumerate(zip(ds.xs, ds.ys)):
        feats = ball.feature_map.transform(x)
        resid = y - predict_fn(x)
        moment = feats.T @ resid / feats.shape[0]
        out[j] = ball.bound * float(np.linalg.norm(moment))
    return out


def evaluate_hypothesis(predict_fn, ds, feature_map, ground_truth=None,
                        ball_bound=1.0, gap=None, fit_curve=None):
    """Assemble an :class:`EvalReport` for a fitted hypothesis.

    Regret compares each group's loss against its exact minimum over the
    feature span, so regrets are nonnegative for any hypothesis in the class.
    The fit curve samples ``h`` on a uniform 201-point grid over [-1, 1]
    (scalar covariates only; disabled otherwise).
    """
    losses = group_square_loss(predict_fn, ds)
    regret = losses - group_min_losses(ds, feature_map)
    ball = TestFunctionBall(feature_map, ball_bound)
    report = EvalReport(
        group_sizes=ds.group_sizes,
        square_loss=losses,
        regret=regret,
        multiaccuracy=multiaccuracy_error(predict_fn, ds, ball),
        mse_h0=None if ground_truth is None
        else mse_to_h0(predict_fn, ground_truth, ds),
        gap=gap,
    )
    if fit_curve is None:
        fit_curve = ds.covariate_dim == 1
    if fit_curve and ds.covariate_dim == 1:
        grid = np.linspace(-1.0, 1.0, 201)
        report.fit_x = grid
        report.fit_h = np.asarray(predict_fn(grid.reshape(-1, 1)), dtype=float)
    return report


@dataclass
class BruteForceResult:
    alpha: np.ndarray
    value: float
    grid_error: float


def brute_force_minmax(gc, grid=401, box=None):
    """Exhaustive minimization of ``max_j g_j(alpha)`` on a dense grid.

    Desk-scale oracle: requires ``d <= 2`` and at most 1001 points per axis.
    ``grid_error`` bounds ``L * step * sqrt(d) / 2`` where ``L`` is a Lipschitz
    constant of the objective over the box, so the true box minimum lies
    within ``grid_error`` of the returned value.
    """
    d = gc.dim
    if d > 2:
        raise ValueError(f"brute force supports d <= 2, got d={d}")
    if grid > 1001 or grid < 2:
        raise ValueError("grid must be in [2, 1001] points per axis")
    if box is None:
        if not np.isfinite(gc.norm_bound):
            raise ValueError("provide a box or a finite norm bound")
        box = [(-gc.norm_bound, gc.norm_bound)] * d
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])

    worst = np.full(points.shape[0], -np.inf)
    for j in range(gc.n_groups):
        quad = np.einsum("gi,gi->g", points @ gc.sigma[j], points)
        vals = (gc.kappa[j] - 2.0 * points @ gc.nu[j] + quad) / gc.group_sizes[j]
        np.maximum(worst, vals, out=worst)
    best = int(np.argmin(worst))

    r_max = float(np.linalg.norm([max(abs(lo), abs(hi)) for lo, hi in box]))
    lipschitz = max(
        2.0 / gc.group_sizes[j]
        * (np.linalg.norm(gc.sigma[j], 2) * r_max + np.linalg.norm(gc.nu[j]))
        for j in range(gc.n_groups)
    )
    step = max((hi - lo) / (grid - 1) for lo, hi in box)
    return BruteForceResult(
        alpha=points[best],
        value=float(worst[best]),
        grid_error=lipschitz * step * np.sqrt(d) / 2.0,
    )


def _table_weights(y, weights):
    y = check_vector(y, "y")
    if weights is None:
        w = np.full(y.shape[0], 1.0 / y.shape[0])
    else:
        w = check_vector(weights, "weights", length=y.shape[0])
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        w = w / w.sum()
    return y, w


def enumerate_adversarial_value(y, h_values, test_values, c, weights=None):
    """Exhaustive ``max_f E[2 (y - h) f - c f^2]`` over a finite test set.

    ``test_values`` has one row per test function, holding its values at the
    table's sample points; the expectation uses ``weights`` (uniform when
    omitted).
    """
    y, w = _table_weights(y, weights)
    h = check_vector(h_values, "h_values", length=y.shape[0])
    F = np.atleast_2d(np.asarray(test_values, dtype=float))
    if F.shape[1] != y.shape[0]:
        raise ValueError("test_values must have one column per sample")
    resid = y - h
    values = F @ (2.0 * resid * w) - c * (F * F) @ w
    return float(values.max())


def completing_square_rhs(x, y, h_values, test_values, c, weights=None):
    """Independent evaluation of the completed-square form of the adversarial value.

    Computes ``(1/c) ||h0 - h||^2 - (1/c) min_f ||h0 - h - c f||^2`` over the
    finite table, with ``h0`` the weighted conditional mean of ``y`` at each
    distinct ``x``. Requires ``c > 0``.
    """
    if c <= 0:
        raise ValueError("completing-square check requires c > 0")
    y, w = _table_weights(y, weights)
    x = check_vector(x, "x", length=y.shape[0])
    h = check_vector(h_values, "h_values", length=y.shape[0])
    F = np.atleast_2d(np.asarray(test_values, dtype=float))
    if F.shape[1] != y.shape[0]:
        raise ValueError("test_values must have one column per sample")
    _, inverse = np.unique(x, return_inverse=True)
    h0 = np.bincount(inverse, weights=w * y) / np.bincount(inverse, weights=w)
    nu = h0[inverse] - h
    dist_sq = float(np.dot(w, nu * nu))
    gaps = nu[None, :] - c * F
    min_fit = float(((gaps * gaps) @ w).min())
    return (dist_sq - min_fit) / c
