"""Runtime-scaling harness: sweep group counts, time each method's phases.

Every (group count, repetition) cell generates one synthetic dataset from a
seed derived purely from (base seed, group count, repetition); all methods in
the cell run on that same dataset, one after another, with no concurrency.
Phase timings use the monotonic performance counter; dataset generation is
untimed and the Nystroem fit counts toward each method's coefficient-build
phase.
"""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import solve_baseline
from .data import SyntheticSpec, generate_synthetic
from .evaluation import group_min_losses, group_square_loss
from .features import fit_nystrom
from .game import SolverConfig, build_linear_coefficients, predict, solve

BENCH_METHODS = ("adv-moment", "dro", "mro")


@dataclass(frozen=True)
class BenchPlan:
    """Sweep definition for the scaling benchmark."""

    group_counts: tuple = (2, 10, 18, 26, 34, 42, 50)
    group_size: int = 100
    repetitions: int = 1
    methods: tuple = BENCH_METHODS
    nystrom_m: int = 100
    nystrom_r: int = None
    iters: int = 300
    gamma: float = 1.0
    lam: float = 1e-3
    mu: float = 1e-8
    norm_bound: float = 100.0
    ridge: float = None
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 1 or self.repetitions < 1 or self.iters < 1:
            raise ValueError("group_size, repetitions, and iters must be >= 1")
        if not self.group_counts:
            raise ValueError("group_counts must be nonempty")
        for count in self.group_counts:
            if count < 2 or count % 2:
                raise ValueError(
                    f"group counts must be even and >= 2, got {count}"
                )
        unknown = set(self.methods) - set(BENCH_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")


@dataclass
class BenchRecord:
    """Timings and the final worst-group regret for one (method, cell, rep)."""

    method: str
    group_count: int
    repetition: int
    seconds: dict = field(default_factory=dict)
    worst_group_regret: float = float("nan")
    dataset_hash: str = ""


def derive_seed(base_seed, group_count, repetition):
    """Pure derived seed for one benchmark cell."""
    ss = np.random.SeedSequence(entropy=int(base_seed),
                                spawn_key=(int(group_count), int(repetition)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def dataset_hash(ds):
    """SHA-256 of the dataset's raw sample bytes in group order."""
    digest = hashlib.sha256()
    for x, y in zip(ds.xs, ds.ys):
        digest.update(np.ascontiguousarray(x, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(y, dtype="<f8").tobytes())
    return digest.hexdigest()


def _run_method(method, ds, plan, seed):
    rank = plan.nystrom_r if plan.nystrom_r is not None else plan.nystrom_m
    m = min(plan.nystrom_m, ds.n_samples)
    rank = min(rank, m)
    ridge = plan.ridge if plan.ridge is not None else plan.lam
    config = SolverConfig(iters=plan.iters)

    t_total0 = time.perf_counter()
    t0 = time.perf_counter()
    fm = fit_nystrom(ds, gamma=plan.gamma, n_landmarks=m, rank=rank, seed=seed)
    t_featurize = time.perf_counter() - t0

    if method == "adv-moment":
        t0 = time.perf_counter()
        coeffs = build_linear_coefficients(
            ds, fm, lam=plan.lam, mu=plan.mu, norm_bound=plan.norm_bound
        )
        t_build = time.perf_counter() - t0
        result = solve(coeffs, config)
        seconds = {
            "coefficient_build": t_featurize + t_build,
            "erm": 0.0,
            "game_loop": sum(result.wallclock.values()),
        }
        alpha = result.alpha_bar
    else:
        result = solve_baseline(method, ds, fm, config=config, ridge=ridge)
        seconds = {
            "coefficient_build": t_featurize + result.wallclock["featurize"],
            "erm": result.wallclock["erm"],
            "game_loop": result.wallclock["game_loop"],
        }
        alpha = result.alpha_bar
    seconds["total"] = time.perf_counter() - t_total0

    regret = group_square_loss(lambda X: predict(alpha, fm, X), ds)
    regret = regret - group_min_losses(ds, fm)
    return seconds, float(regret.max())


def run_bench(plan):
    """Execute the sweep and return one :class:`BenchRecord` per run.

    One warm-up execution per method on the smallest cell is discarded before
    any timing. Cells run strictly sequentially.
    """
    records = []
    smallest = min(plan.group_counts)
    warm_seed = derive_seed(plan.seed, smallest, 0)
    warm_ds, _ = generate_synthetic(
        SyntheticSpec(k=smallest // 2, group_size=plan.group_size, seed=warm_seed)
    )
    for method in plan.methods:
        _run_method(method, warm_ds, plan, warm_seed)

    for group_count in plan.group_counts:
        for rep in range(plan.repetitions):
            seed = derive_seed(plan.seed, group_count, rep)
            ds, _ = generate_synthetic(
                SyntheticSpec(
                    k=group_count // 2, group_size=plan.group_size, seed=seed
                )
            )
            fingerprint = dataset_hash(ds)
            for method in plan.methods:
                try:
                    seconds, regret = _run_method(method, ds, plan, seed)
                except Exception as exc:
                    raise RuntimeError(
                        f"benchmark cell failed: method={method} "
                        f"groups={group_count} rep={rep}"
                    ) from exc
                records.append(
                    BenchRecord(
                        method=method,
                        group_count=group_count,
                        repetition=rep,
                        seconds=seconds,
                        worst_group_regret=regret,
                        dataset_hash=fingerprint,
                    )
                )
    return records


def aggregate(records):
    """Mean and standard error of each phase per (method, group count).

    Standard error is ``sd / sqrt(R)`` with the sample standard deviation
    (0 when R == 1).
    """
    cells = {}
    for rec in records:
        for phase, secs in rec.seconds.items():
            cells.setdefault((rec.method, rec.group_count, phase), []).append(secs)
    rows = []
    for (method, group_count, phase), values in sorted(cells.items()):
        arr = np.asarray(values)
        se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        rows.append(
            {
                "method": method,
                "group_count": group_count,
                "phase": phase,
                "mean_seconds": float(arr.mean()),
                "se_seconds": se,
            }
        )
    return rows
