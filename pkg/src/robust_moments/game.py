"""Reduced zero-sum game between a regression learner and a group adversary.

For linear (or explicitly featurized) hypothesis spaces the worst-group
adversarial-moment objective collapses to per-group quadratics
``g_j(alpha) = (kappa_j - 2 nu_j . alpha + alpha' Sigma_j alpha) / n_j``.
The adversary mixes groups with multiplicative weights; the learner plays the
exact best response each round; the averaged iterates form an approximate
equilibrium whose quality is certified by a duality gap.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_simplex, check_vector
from .features import rbf_kernel


@dataclass
class GameCoefficients:
    """Per-group quadratic payoff data ``(kappa_j, nu_j, Sigma_j)``.

    ``sigma[j]`` is symmetric PSD for ``lam, mu >= 0``; ``group_sizes[j]``
    scales group ``j``'s payoff by ``1/n_j``.
    """

    kappa: np.ndarray      # (M,)
    nu: np.ndarray         # (M, d)
    sigma: np.ndarray      # (M, d, d)
    group_sizes: np.ndarray
    lam: float = 0.0
    mu: float = 0.0
    norm_bound: float = np.inf
    a_n: float = 1.0

    def __post_init__(self):
        self.kappa = np.asarray(self.kappa, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.group_sizes = np.asarray(self.group_sizes, dtype=float)
        M = self.kappa.shape[0]
        if self.nu.shape[0] != M or self.sigma.shape[0] != M:
            raise ValueError("kappa, nu, sigma must agree on the group count")
        if self.sigma.shape[1:] != (self.dim, self.dim):
            raise ValueError("sigma blocks must be (d, d)")

    @property
    def n_groups(self):
        return self.kappa.shape[0]

    @property
    def dim(self):
        return self.nu.shape[1]

    def payoffs(self, alpha):
        """Per-group objective values ``g_j(alpha)``."""
        quad = np.einsum("mi,i->m", self.sigma @ alpha, alpha)
        return (self.kappa - 2.0 * (self.nu @ alpha) + quad) / self.group_sizes

    def weighted_objective(self, alpha, w):
        return float(np.dot(w, self.payoffs(alpha)))


@dataclass
class SolverConfig:
    """Knobs of the no-regret loop.

    ``eta=None`` uses ``sqrt(log(max(M, 2)) / iters)``. Payoffs are divided by
    a running bound on their magnitude before the exponential update, then
    clipped to ``[-payoff_clip, payoff_clip]``.
    """

    iters: int = 1000
    eta: float = None
    payoff_clip: float = 1.0
    ridge_jitter: float = 1e-10

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")
        if self.eta is not None:
            check_positive(self.eta, "eta")
        check_positive(self.payoff_clip, "payoff_clip")
        check_positive(self.ridge_jitter, "ridge_jitter")


@dataclass
class SolverResult:
    """Averaged iterates plus the per-iteration trace and gap certificate."""

    alpha_bar: np.ndarray
    w_bar: np.ndarray
    group_objectives: np.ndarray   # (T, M) values of g_j at alpha_t
    gap_estimates: np.ndarray      # (T,) running upper bounds on the gap
    gap: float
    boundary_hits: int = 0
    wallclock: dict = field(default_factory=dict)

    @property
    def worst_group_objective(self):
        return float(self.group_objectives[-1].max())


def _solve_columns(mat, rhs, jitter, what):
    """Solve ``mat @ X = rhs`` with a relative-ridge fallback for singular systems."""
    scale = max(np.trace(mat) / mat.shape[0], 1.0)
    try:
        sol = np.linalg.solve(mat, rhs)
        residual = np.linalg.norm(mat @ sol - rhs)
        if np.all(np.isfinite(sol)) and residual <= 1e-6 * max(
            np.linalg.norm(rhs), 1.0
        ):
            return sol
    except np.linalg.LinAlgError:
        pass
    warnings.warn(
        f"singular system in {what}; adding relative jitter {jitter:g}",
        RuntimeWarning,
    )
    return np.linalg.solve(mat + jitter * scale * np.eye(mat.shape[0]), rhs)


def build_linear_coefficients(ds, feature_map, lam=0.0, mu=0.0,
                              norm_bound=np.inf, a_n=1.0, ridge_jitter=1e-10):
    """Reduce a grouped dataset with explicit features to game coefficients.

    For each group with feature matrix ``Phi`` and labels ``y``::

        R       = (a_n Phi'Phi + n lam I)^{-1}
        kappa_j = y'Phi R Phi'y
        nu_j    = Phi'Phi R Phi'y
        Sigma_j = Phi'Phi R Phi'Phi + mu n I

    so that ``g_j(alpha)`` equals the group's optimal regularized moment
    violation against the linear test-function class.
    """
    check_positive(lam, "lam", strict=False)
    check_positive(mu, "mu", strict=False)
    check_positive(a_n, "a_n")
    d = feature_map.dim
    M = ds.n_groups
    kappa = np.empty(M)
    nu = np.empty((M, d))
    sigma = np.empty((M, d, d))
    eye = np.eye(d)
    for j in range(M):
        Phi = feature_map.transform(ds.xs[j])
        n = Phi.shape[0]
        G = Phi.T @ Phi
        B = Phi.T @ ds.ys[j]
        mat = a_n * G + n * lam * eye
        sol = _solve_columns(
            mat, np.column_stack([B, G]), ridge_jitter, f"group {j} coefficients"
        )
        RB, RG = sol[:, 0], sol[:, 1:]
        kappa[j] = B @ RB
        nu[j] = G @ RB
        S = G @ RG + mu * n * eye
        sigma[j] = 0.5 * (S + S.T)
    return GameCoefficients(
        kappa=kappa, nu=nu, sigma=sigma, group_sizes=ds.group_sizes,
        lam=lam, mu=mu, norm_bound=norm_bound, a_n=a_n,
    )


def build_rkhs_coefficients(kernels, ys, lam, mu=0.0, norm_bound=np.inf,
                            a_n=1.0):
    """Reduce an RKHS instance to game coefficients over representer weights.

    ``alpha`` lives in R^N (one weight per training sample); for each group
    with kernel block ``K_j`` and cross rows ``M_j``::

        Q_j     = K_j (a_n K_j + n lam I)^{-1}
        kappa_j = y_j' Q_j y_j
        nu_j    = M_j' Q_j y_j
        Sigma_j = M_j' Q_j M_j + mu n M

    ``lam`` must be positive (the closed form inverts ``a_n K_j + n lam I``).
    """
    if lam <= 0:
        raise ValueError("build_rkhs_coefficients requires lam > 0")
    check_positive(mu, "mu", strict=False)
    check_positive(a_n, "a_n")
    M = kernels.n_groups
    N = kernels.full.shape[0]
    sizes = np.diff(kernels.offsets)
    if len(ys) != M or any(len(ys[j]) != sizes[j] for j in range(M)):
        raise ValueError("labels do not match the kernel group sizes")
    kappa = np.empty(M)
    nu = np.empty((M, N))
    sigma = np.empty((M, N, N))
    for j in range(M):
        K = kernels.blocks[j]
        n = int(sizes[j])
        y = check_vector(ys[j], name=f"group {j} labels")
        rows = kernels.row_block(j)
        S = a_n * K + n * lam * np.eye(n)
        sol = np.linalg.solve(S, np.column_stack([y, rows]))
        Qy = K @ sol[:, 0]
        QM = K @ sol[:, 1:]
        kappa[j] = y @ Qy
        nu[j] = rows.T @ Qy
        Sj = rows.T @ QM + mu * n * kernels.full
        sigma[j] = 0.5 * (Sj + Sj.T)
    return GameCoefficients(
        kappa=kappa, nu=nu, sigma=sigma, group_sizes=sizes.astype(float),
        lam=lam, mu=mu, norm_bound=norm_bound, a_n=a_n,
    )


def optimal_rkhs_violation(kernel_matrix, residuals, lam, a_n=1.0):
    """Closed-form optimal moment violation of one group at fixed residuals.

    Equals ``max_f mean(2 r f - a_n f^2) - lam ||f||^2`` over the RKHS, i.e.
    ``(1/n) r' K (a_n K + n lam I)^{-1} r``.
    """
    r = check_vector(residuals, "residuals")
    n = r.shape[0]
    S = a_n * kernel_matrix + n * lam * np.eye(n)
    return float(r @ (kernel_matrix @ np.linalg.solve(S, r))) / n


def _pinv_solve(eigvals, eigvecs, target, rel_tol=1e-12):
    tol = rel_tol * max(eigvals.max(initial=0.0), 0.0)
    coeffs = eigvecs.T @ target
    inv = np.zeros_like(eigvals)
    keep = eigvals > tol
    inv[keep] = 1.0 / eigvals[keep]
    return eigvecs @ (coeffs * inv)


def _project_to_ball(eigvals, eigvecs, target, bound):
    """Solve ``(Sbar + tau I) alpha = target`` with ``||alpha|| = bound``, tau >= 0."""
    lam = np.maximum(eigvals, 0.0)
    c = eigvecs.T @ target
    c_norm = np.linalg.norm(c)

    def norm_sq(tau):
        return float(np.sum((c / (lam + tau)) ** 2))

    hi = c_norm / bound  # ||alpha(hi)|| <= bound by construction
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if norm_sq(mid) > bound * bound:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    return eigvecs @ (c / (lam + tau))


def _best_response(w, gc):
    inv_n = w / gc.group_sizes
    sbar = np.tensordot(inv_n, gc.sigma, axes=1)
    nbar = inv_n @ gc.nu
    eigvals, eigvecs = np.linalg.eigh(sbar)
    alpha = _pinv_solve(eigvals, eigvecs, nbar)
    clipped = False
    norm = np.linalg.norm(alpha)
    if np.isfinite(gc.norm_bound) and norm > gc.norm_bound:
        alpha = _project_to_ball(eigvals, eigvecs, nbar, gc.norm_bound)
        clipped = True
    return alpha, clipped


def best_response(w, gc):
    """Exact learner minimizer of the ``w``-weighted game objective.

    Uses the pseudo-inverse of the weighted curvature (symmetric
    eigendecomposition, relative cutoff 1e-12); if the unconstrained solution
    leaves the norm ball it is replaced by the exact ball-constrained
    minimizer found by bisecting the constraint multiplier.
    """
    w = check_simplex(w, n=gc.n_groups)
    alpha, _ = _best_response(w, gc)
    return alpha


def mw_update(w, payoffs, eta, payoff_clip=np.inf):
    """One multiplicative-weights step, computed in log space.

    Payoffs are clipped to ``[-payoff_clip, payoff_clip]`` before the
    exponentiation; subtracting the max exponent makes the update invariant
    to constant payoff shifts (within the clip range) and overflow-free.
    """
    w = np.asarray(w, dtype=float)
    payoffs = np.asarray(payoffs, dtype=float)
    if w.shape != payoffs.shape:
        raise ValueError("w and payoffs must have matching shapes")
    if not np.all(np.isfinite(payoffs)):
        raise ValueError("payoffs must be finite")
    p = np.clip(payoffs, -payoff_clip, payoff_clip)
    with np.errstate(divide="ignore"):
        logw = np.log(w) + eta * p
    logw -= logw.max()
    out = np.exp(logw)
    return out / out.sum()


def solve(gc, config=None):
    """Run multiplicative weights against exact best responses.

    Returns the averaged iterates together with a duality-gap certificate
    ``max_j g_j(alpha_bar) - min_alpha sum_j wbar_j g_j(alpha)`` (the inner
    minimum computed by one extra best response at ``w_bar``).
    """
    config = config or SolverConfig()
    M = gc.n_groups
    T = config.iters
    eta = config.eta
    if eta is None:
        eta = math.sqrt(math.log(max(M, 2)) / T)
    w = np.full(M, 1.0 / M)
    alpha_sum = np.zeros(gc.dim)
    w_sum = np.zeros(M)
    group_objectives = np.empty((T, M))
    gap_estimates = np.empty(T)
    payoff_bound = 0.0
    learner_value_sum = 0.0
    payoff_cumsum = np.zeros(M)
    boundary_hits = 0

    t0 = time.perf_counter()
    for t in range(T):
        alpha, clipped = _best_response(w, gc)
        boundary_hits += clipped
        g = gc.payoffs(alpha)
        group_objectives[t] = g
        alpha_sum += alpha
        w_sum += w
        payoff_cumsum += g
        learner_value_sum += float(w @ g)
        gap_estimates[t] = (payoff_cumsum.max() - learner_value_sum) / (t + 1)
        payoff_bound = max(payoff_bound, float(np.abs(g).max()), 1e-300)
        w = mw_update(w, g / payoff_bound, eta, config.payoff_clip)
    t1 = time.perf_counter()

    alpha_bar = alpha_sum / T
    w_bar = w_sum / T
    w_bar = np.clip(w_bar, 0.0, None)
    w_bar /= w_bar.sum()
    alpha_star, _ = _best_response(w_bar, gc)
    gap = float(gc.payoffs(alpha_bar).max() - w_bar @ gc.payoffs(alpha_star))
    t2 = time.perf_counter()

    return SolverResult(
        alpha_bar=alpha_bar,
        w_bar=w_bar,
        group_objectives=group_objectives,
        gap_estimates=gap_estimates,
        gap=gap,
        boundary_hits=boundary_hits,
        wallclock={"game_loop": t1 - t0, "certificate": t2 - t1},
    )


def predict(alpha, feature_map, X):
    """Evaluate the featurized hypothesis ``x -> alpha . phi(x)``."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    feats = feature_map.transform(X.reshape(1, -1) if single else X)
    alpha = check_vector(alpha, "alpha", length=feats.shape[1])
    out = feats @ alpha
    return float(out[0]) if single else out


def predict_rkhs(alpha, anchors, gamma, X):
    """Evaluate the representer hypothesis ``x -> sum_i alpha_i k(x_i, x)``."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    K = rbf_kernel(X.reshape(1, -1) if single else X, anchors, gamma)
    alpha = check_vector(alpha, "alpha", length=K.shape[1])
    out = K @ alpha
    return float(out[0]) if single else out


def moment_violation(h_values, y, f_values, a_n=1.0):
    """Empirical moment violation ``mean(2 (y - h) f - a_n f^2)``."""
    h = check_vector(h_values, "h_values")
    y = check_vector(y, "y", length=h.shape[0])
    f = check_vector(f_values, "f_values", length=h.shape[0])
    return float(np.mean(2.0 * (y - h) * f - a_n * f * f))
