"""Self-contained property checks exposed through the CLI ``verify`` command.

Each check re-derives its expected values by enumeration or direct algebra,
independent of the solver paths it audits, and reports one pass/fail line.
``inject_fault=True`` deliberately corrupts the completed-square evaluation to
demonstrate that the suite can fail.
"""

from dataclasses import dataclass

import numpy as np

from .data import GroupedDataset
from .evaluation import (
    brute_force_minmax,
    completing_square_rhs,
    enumerate_adversarial_value,
)
from .features import LinearFeatures, NystromFeatures, rbf_kernel
from .game import (
    SolverConfig,
    best_response,
    build_linear_coefficients,
    mw_update,
    solve,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_table(rng):
    """Finite (x, y) table with repeated x values and sampling weights."""
    n_x = int(rng.integers(2, 21))
    xs = rng.normal(size=n_x)
    idx = rng.integers(0, n_x, size=int(rng.integers(n_x, 2 * n_x + 1)))
    x = xs[idx]
    y = rng.normal(size=x.shape[0])
    w = rng.uniform(0.2, 1.0, size=x.shape[0])
    w /= w.sum()
    return x, idx, n_x, y, w


def check_completing_square(seed=0, inject_fault=False, n_instances=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        x, idx, n_x, y, w = _random_table(rng)
        # hypotheses and test functions are functions of x (consistent on repeats)
        h = rng.normal(size=n_x)[idx]
        F = rng.normal(size=(int(rng.integers(1, 51)), n_x))[:, idx]
        c = float(rng.choice([0.5, 1.0, 2.0]))
        lhs = enumerate_adversarial_value(y, h, F, c, weights=w)
        rhs = completing_square_rhs(x, y, h, F, c, weights=w)
        if inject_fault:
            rhs = -rhs
        worst = max(worst, abs(lhs - rhs))
    return CheckResult(
        "completing-square-identity",
        worst <= 1e-8,
        f"max |lhs - rhs| = {worst:.3g} over {n_instances} instances",
    )


def _sandwich_instance(rng):
    """Multi-distribution finite instance with (h_D - h)/c in the test class."""
    n_x = int(rng.integers(3, 12))
    x = np.arange(n_x, dtype=float)
    h0 = rng.normal(size=n_x)
    h = rng.normal(size=n_x)
    dists = []
    for _ in range(int(rng.integers(1, 4))):
        w = rng.uniform(0.2, 1.0, size=n_x)
        dists.append(w / w.sum())
    # candidate hypotheses (h_D picked among them per distribution)
    cands = [h0 + rng.normal(scale=0.3, size=n_x) for _ in range(4)]
    return x, h0, h, dists, cands


def check_sandwich_bounds(seed=1, n_instances=100):
    rng = np.random.default_rng(seed)
    ok = True
    detail = ""
    for k in range(n_instances):
        x, h0, h, dists, cands = _sandwich_instance(rng)
        c = float(rng.choice([0.5, 1.0, 2.0]))
        h_ds, eps = [], 0.0
        for w in dists:
            errs = [float(w @ (hc - h0) ** 2) for hc in cands]
            best = int(np.argmin(errs))
            h_ds.append(cands[best])
            eps = max(eps, errs[best])
        F = np.array([(hd - h) / c for hd in h_ds])
        F = np.vstack([F, rng.normal(size=(5, x.shape[0]))])
        value = max(
            enumerate_adversarial_value(h0, h, F, c, weights=w) for w in dists
        )
        worst_dist = max(float(w @ (h0 - h) ** 2) for w in dists)
        lower = (worst_dist - eps) / c
        upper = worst_dist / c
        if not (lower - 1e-8 <= value <= upper + 1e-8):
            ok = False
            detail = f"instance {k}: value {value:.6g} outside [{lower:.6g}, {upper:.6g}]"
            break
    return CheckResult("sandwich-bounds", ok, detail or f"{n_instances} instances in range")


def check_realizable_equivalence(seed=2, n_instances=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        x, h0, h, dists, cands = _sandwich_instance(rng)
        cands = cands + [h]
        # residual-spanning test class: every h' - h, so min_f ||h0-h-f|| picks h_D
        F = np.array([hc - h for hc in cands])
        for w in dists:
            value = enumerate_adversarial_value(h0, h, F, 1.0, weights=w)
            best_fit = min(float(w @ (h0 - hc) ** 2) for hc in cands)
            target = float(w @ (h0 - h) ** 2) - best_fit
            worst = max(worst, abs(value - target))
    return CheckResult(
        "realizable-equivalence-c1",
        worst <= 1e-8,
        f"max deviation {worst:.3g}",
    )


def check_mw_shift_invariance(seed=3, n_instances=200):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        m = int(rng.integers(2, 9))
        w = rng.uniform(0.1, 1.0, size=m)
        w /= w.sum()
        payoffs = rng.normal(size=m)
        shift = float(rng.normal(scale=5.0))
        a = mw_update(w, payoffs, eta=0.3)
        b = mw_update(w, payoffs + shift, eta=0.3)
        worst = max(worst, float(np.abs(a - b).max()))
    return CheckResult(
        "mw-shift-invariance", worst <= 1e-12, f"max drift {worst:.3g}"
    )


def _random_game(rng, d=3, M=4, n=12):
    xs, ys = [], []
    for _ in range(M):
        xs.append(rng.normal(size=(n, d)))
        ys.append(rng.normal(size=n))
    ds = GroupedDataset(tuple(xs), tuple(ys))
    return build_linear_coefficients(
        ds, LinearFeatures(dim=d), lam=0.1, mu=0.01, norm_bound=50.0
    )


def check_best_response_stationarity(seed=4, n_instances=50):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        gc = _random_game(rng)
        w = rng.uniform(0.1, 1.0, size=gc.n_groups)
        w /= w.sum()
        alpha = best_response(w, gc)
        inv_n = w / gc.group_sizes
        sbar = np.tensordot(inv_n, gc.sigma, axes=1)
        nbar = inv_n @ gc.nu
        grad = 2.0 * (sbar @ alpha - nbar)
        bound = 1e-8 * (1.0 + np.linalg.norm(nbar))
        worst = max(worst, float(np.linalg.norm(grad) / bound))
    return CheckResult(
        "best-response-stationarity",
        worst <= 1.0,
        f"max gradient/bound ratio {worst:.3g}",
    )


def check_payoff_convexity(seed=5, n_instances=50):
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(n_instances):
        gc = _random_game(rng)
        a = rng.normal(size=gc.dim)
        b = rng.normal(size=gc.dim)
        mid = gc.payoffs(0.5 * (a + b))
        hull = 0.5 * (gc.payoffs(a) + gc.payoffs(b))
        if np.any(mid > hull + 1e-10):
            ok = False
            break
    return CheckResult(
        "payoff-midpoint-convexity", ok, f"{n_instances} instances"
    )


def check_nystrom_exactness(seed=6):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2))
    fm = NystromFeatures(gamma=0.7, n_landmarks=40, random_state=0).fit(X)
    feats = fm.transform(X)
    K = rbf_kernel(X, X, 0.7)
    err = np.linalg.norm(K - feats @ feats.T) / np.linalg.norm(K)
    return CheckResult(
        "nystrom-exactness", err <= 1e-6, f"relative error {err:.3g}"
    )


def check_duality_gap(seed=7):
    rng = np.random.default_rng(seed)
    gc = _random_game(rng, d=3, M=5, n=20)
    gap_small = solve(gc, SolverConfig(iters=20)).gap
    gap_large = solve(gc, SolverConfig(iters=2000)).gap
    ok = gap_small >= -1e-8 and gap_large >= -1e-8 and gap_large < gap_small
    return CheckResult(
        "duality-gap-decay",
        ok,
        f"gap(T=20) = {gap_small:.3g}, gap(T=2000) = {gap_large:.3g}",
    )


def check_brute_force_agreement(seed=8):
    rng = np.random.default_rng(seed)
    gc = _random_game(rng, d=2, M=3, n=10)
    result = solve(gc, SolverConfig(iters=3000))
    brute = brute_force_minmax(gc, grid=301, box=[(-2.0, 2.0)] * 2)
    achieved = float(gc.payoffs(result.alpha_bar).max())
    tol = result.gap + brute.grid_error + 1e-9
    ok = achieved <= brute.value + tol and achieved >= brute.value - brute.grid_error - 1e-9
    return CheckResult(
        "solver-vs-brute-force",
        ok,
        f"solver {achieved:.6g} vs grid {brute.value:.6g} (tol {tol:.2g})",
    )


def run_checks(seed=0, inject_fault=False):
    """Run the full invariant suite; returns a list of :class:`CheckResult`."""
    return [
        check_completing_square(seed, inject_fault=inject_fault),
        check_sandwich_bounds(seed + 1),
        check_realizable_equivalence(seed + 2),
        check_mw_shift_invariance(seed + 3),
        check_best_response_stationarity(seed + 4),
        check_payoff_convexity(seed + 5),
        check_nystrom_exactness(seed + 6),
        check_duality_gap(seed + 7),
        check_brute_force_agreement(seed + 8),
    ]
