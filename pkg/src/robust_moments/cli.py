"""Experiment command line: ``fit``, ``eval``, ``bench``, and ``verify``.

Configuration comes from an optional JSON file plus flag overrides (flags
win). Every successful run writes a manifest listing the emitted files with
sizes and SHA-256 checksums next to the artifacts.

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import solve_baseline
from .bench import BenchPlan, aggregate, dataset_hash, run_bench
from .data import (
    DatasetFormatError,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
)
from .evaluation import evaluate_hypothesis
from .features import NystromFeatures, fit_nystrom
from .game import SolverConfig, build_linear_coefficients, predict, solve
from .oracle import LinearBallOracles, oracle_solve
from .verify import run_checks

METHODS = ("adv-moment", "dro", "mro", "oracle")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Resolved configuration of one CLI run."""

    mode: str
    method: str = "adv-moment"
    synthetic: dict = None
    dataset: str = None
    gamma: float = 1.0
    nystrom_m: int = 100
    nystrom_r: int = None
    iters: int = 2000
    eta: float = None
    lam: float = 1e-3
    mu: float = 1e-8
    norm_bound: float = 100.0
    a_n: float = 1.0
    ridge: float = None
    seed: int = 0
    out: str = "runs/latest"
    threads: int = None
    model: str = None
    bench: dict = field(default_factory=dict)
    inject_fault: bool = False

    def echo(self):
        return asdict(self)


_FLAG_FIELDS = {
    "method": "method",
    "iters": "iters",
    "eta": "eta",
    "lam": "lam",
    "mu": "mu",
    "norm_bound": "norm_bound",
    "a_n": "a_n",
    "gamma": "gamma",
    "nystrom_m": "nystrom_m",
    "nystrom_r": "nystrom_r",
    "seed": "seed",
    "out": "out",
    "threads": "threads",
    "model": "model",
}


def resolve_config(args):
    """Merge the JSON config file (if any) with flag overrides (flags win)."""
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    values.pop("mode", None)
    if "lambda" in values:
        values["lam"] = values.pop("lambda")
    cfg = RunConfig(mode=args.mode)
    known = set(cfg.__dataclass_fields__)
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    for flag, fieldname in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, fieldname, value)
    if getattr(args, "groups", None) is not None or getattr(
        args, "group_size", None
    ) is not None:
        synthetic = dict(cfg.synthetic or {})
        if getattr(args, "groups", None) is not None:
            if args.groups < 2 or args.groups % 2:
                raise ConfigError("--groups must be an even count >= 2")
            synthetic["k"] = args.groups // 2
        if getattr(args, "group_size", None) is not None:
            synthetic["group_size"] = args.group_size
        cfg.synthetic = synthetic
    if cfg.threads is None:
        env = os.environ.get("ROBUST_MOMENTS_THREADS")
        if env:
            try:
                cfg.threads = int(env)
            except ValueError:
                raise ConfigError(
                    f"ROBUST_MOMENTS_THREADS must be an integer, got {env!r}"
                ) from None
    cfg.inject_fault = bool(getattr(args, "inject_fault", False))
    if cfg.method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.dataset is not None and cfg.synthetic is not None:
        raise ConfigError("specify exactly one data source (synthetic or dataset)")
    return cfg


def _load_or_generate(cfg):
    if cfg.dataset is not None:
        return load_dataset(cfg.dataset), None
    spec_kwargs = dict(cfg.synthetic or {})
    spec_kwargs.setdefault("seed", cfg.seed)
    ds, gt = generate_synthetic(SyntheticSpec(**spec_kwargs))
    return ds, gt


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, cfg, files, fingerprint, wallclock):
    entries = []
    for name in files:
        path = Path(out_dir) / name
        entries.append(
            {"name": name, "bytes": path.stat().st_size, "sha256": _sha256(path)}
        )
    manifest = {
        "config": cfg.echo(),
        "version": __version__,
        "dataset_hash": fingerprint,
        "wallclock_seconds": wallclock,
        "files": entries,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_trace_csv(path, group_objectives, gap_estimates=None):
    T, M = group_objectives.shape
    with open(path, "w") as fh:
        cols = ["t"]
        if gap_estimates is not None:
            cols.append("gap_estimate")
        cols += [f"objective_g{j}" for j in range(M)]
        fh.write(",".join(cols) + "\n")
        for t in range(T):
            row = [str(t + 1)]
            if gap_estimates is not None:
                row.append(f"{gap_estimates[t]:.17g}")
            row += [f"{v:.17g}" for v in group_objectives[t]]
            fh.write(",".join(row) + "\n")


def _feature_arrays(fm):
    if isinstance(fm, NystromFeatures):
        return {
            "feature_kind": "nystrom-rbf",
            "gamma": np.array(fm.gamma),
            "landmarks": fm.landmarks_,
            "projection": fm.projection_,
        }
    raise ConfigError(f"cannot persist feature map of type {type(fm).__name__}")


def _feature_map_from_model(data):
    fm = NystromFeatures(gamma=float(data["gamma"]))
    fm.landmarks_ = data["landmarks"]
    fm.projection_ = data["projection"]
    fm.rank_ = fm.projection_.shape[1]
    return fm


def cmd_fit(cfg):
    t_start = time.perf_counter()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds, _ = _load_or_generate(cfg)
    fingerprint = dataset_hash(ds)
    rank = cfg.nystrom_r if cfg.nystrom_r is not None else cfg.nystrom_m
    fm = fit_nystrom(
        ds,
        gamma=cfg.gamma,
        n_landmarks=min(cfg.nystrom_m, ds.n_samples),
        rank=min(rank, cfg.nystrom_m, ds.n_samples),
        seed=cfg.seed,
    )
    solver_cfg = SolverConfig(iters=cfg.iters, eta=cfg.eta)
    ridge = cfg.ridge if cfg.ridge is not None else cfg.lam

    if cfg.method == "adv-moment":
        coeffs = build_linear_coefficients(
            ds, fm, lam=cfg.lam, mu=cfg.mu, norm_bound=cfg.norm_bound, a_n=cfg.a_n
        )
        result = solve(coeffs, solver_cfg)
        alpha, w_bar, gap = result.alpha_bar, result.w_bar, result.gap
        trace, gaps = result.group_objectives, result.gap_estimates
    elif cfg.method in ("dro", "mro"):
        result = solve_baseline(cfg.method, ds, fm, config=solver_cfg, ridge=ridge)
        alpha, w_bar, gap = result.alpha_bar, result.w_bar, result.gap
        trace, gaps = result.group_objectives, None
    else:  # oracle
        oracles = LinearBallOracles(ds, fm, norm_bound=cfg.norm_bound)
        result = oracle_solve(ds, oracles, config=solver_cfg)
        alpha, w_bar, gap = result.hypothesis_coef, result.w_bar, result.gap
        trace, gaps = result.group_objectives, None

    model_path = out_dir / "model.npz"
    np.savez(
        model_path,
        method=cfg.method,
        alpha=alpha,
        w_bar=w_bar,
        gap=np.array(gap),
        lam=np.array(cfg.lam),
        mu=np.array(cfg.mu),
        norm_bound=np.array(cfg.norm_bound),
        a_n=np.array(cfg.a_n),
        **_feature_arrays(fm),
    )
    _write_trace_csv(out_dir / "trace.csv", trace, gaps)
    wallclock = time.perf_counter() - t_start
    write_manifest(out_dir, cfg, ["model.npz", "trace.csv"], fingerprint, wallclock)
    print(f"fit: method={cfg.method} gap={gap:.6g} out={out_dir}")
    return 0


def cmd_eval(cfg):
    t_start = time.perf_counter()
    if not cfg.model:
        raise ConfigError("eval requires --model pointing at a fit artifact")
    model_path = Path(cfg.model)
    if not model_path.exists():
        raise ConfigError(f"model file not found: {model_path}")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with np.load(model_path, allow_pickle=False) as data:
        alpha = data["alpha"]
        gap = float(data["gap"])
        fm = _feature_map_from_model(data)
    ds, gt = _load_or_generate(cfg)
    if ds.covariate_dim != fm.landmarks_.shape[1]:
        raise ConfigError(
            f"model expects covariate dim {fm.landmarks_.shape[1]}, "
            f"dataset has {ds.covariate_dim}"
        )
    report = evaluate_hypothesis(
        lambda X: predict(alpha, fm, X), ds, fm, ground_truth=gt, gap=gap
    )

    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w") as fh:
        cols = ["group", "n", "square_loss", "regret", "multiaccuracy"]
        if report.mse_h0 is not None:
            cols.append("mse_to_h0")
        fh.write(",".join(cols) + "\n")
        for j in range(ds.n_groups):
            row = [
                str(j),
                str(int(report.group_sizes[j])),
                f"{report.square_loss[j]:.17g}",
                f"{report.regret[j]:.17g}",
                f"{report.multiaccuracy[j]:.17g}",
            ]
            if report.mse_h0 is not None:
                row.append(f"{report.mse_h0[j]:.17g}")
            fh.write(",".join(row) + "\n")
        worst = [
            "worst",
            str(int(report.group_sizes.sum())),
            f"{report.worst('square_loss')[1]:.17g}",
            f"{report.worst('regret')[1]:.17g}",
            f"{report.worst('multiaccuracy')[1]:.17g}",
        ]
        if report.mse_h0 is not None:
            worst.append(f"{report.worst('mse_h0')[1]:.17g}")
        fh.write(",".join(worst) + "\n")

    files = ["metrics.csv"]
    if report.fit_x is not None:
        with open(out_dir / "fit_curve.csv", "w") as fh:
            fh.write("x,h_of_x\n")
            for xv, hv in zip(report.fit_x, report.fit_h):
                fh.write(f"{xv:.17g},{hv:.17g}\n")
        files.append("fit_curve.csv")
    wallclock = time.perf_counter() - t_start
    write_manifest(out_dir, cfg, files, dataset_hash(ds), wallclock)
    print(f"eval: worst regret={report.worst('regret')[1]:.6g} out={out_dir}")
    return 0


def cmd_bench(cfg):
    t_start = time.perf_counter()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan_kwargs = dict(cfg.bench or {})
    plan_kwargs.setdefault("gamma", cfg.gamma)
    plan_kwargs.setdefault("lam", cfg.lam)
    plan_kwargs.setdefault("mu", cfg.mu)
    plan_kwargs.setdefault("norm_bound", cfg.norm_bound)
    plan_kwargs.setdefault("nystrom_m", cfg.nystrom_m)
    if cfg.nystrom_r is not None:
        plan_kwargs.setdefault("nystrom_r", cfg.nystrom_r)
    plan_kwargs.setdefault("seed", cfg.seed)
    if "group_counts" in plan_kwargs:
        plan_kwargs["group_counts"] = tuple(plan_kwargs["group_counts"])
    if "methods" in plan_kwargs:
        plan_kwargs["methods"] = tuple(plan_kwargs["methods"])
    try:
        plan = BenchPlan(**plan_kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid bench plan: {exc}") from None
    records = run_bench(plan)

    raw_path = out_dir / "bench_raw.csv"
    with open(raw_path, "w") as fh:
        fh.write("method,group_count,rep,phase,seconds\n")
        for rec in records:
            for phase, secs in rec.seconds.items():
                fh.write(
                    f"{rec.method},{rec.group_count},{rec.repetition},"
                    f"{phase},{secs:.17g}\n"
                )
    regret_path = out_dir / "bench_regrets.csv"
    with open(regret_path, "w") as fh:
        fh.write("method,group_count,rep,worst_group_regret,dataset_hash\n")
        for rec in records:
            fh.write(
                f"{rec.method},{rec.group_count},{rec.repetition},"
                f"{rec.worst_group_regret:.17g},{rec.dataset_hash}\n"
            )
    agg_path = out_dir / "bench_aggregate.csv"
    with open(agg_path, "w") as fh:
        fh.write("method,group_count,phase,mean_seconds,se_seconds\n")
        for row in aggregate(records):
            fh.write(
                f"{row['method']},{row['group_count']},{row['phase']},"
                f"{row['mean_seconds']:.17g},{row['se_seconds']:.17g}\n"
            )
    wallclock = time.perf_counter() - t_start
    write_manifest(
        out_dir,
        cfg,
        ["bench_raw.csv", "bench_regrets.csv", "bench_aggregate.csv"],
        None,
        wallclock,
    )
    print(f"bench: {len(records)} records out={out_dir}")
    return 0


def cmd_verify(cfg):
    results = run_checks(seed=cfg.seed, inject_fault=cfg.inject_fault)
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        failures += not res.passed
        print(f"{status} {res.name}: {res.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robust-moments",
        description="Group-robust regression experiments "
        "(adversarial moments, groupDRO, minmax regret).",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in [
        ("fit", "train a model and write model/trace artifacts"),
        ("eval", "evaluate a fitted model (per-group metrics, fit curve)"),
        ("bench", "run the runtime-scaling benchmark"),
        ("verify", "run the invariant check suite"),
    ]:
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--groups", type=int,
                       help="total synthetic group count (even)")
        p.add_argument("--group-size", type=int, dest="group_size")
        p.add_argument("--iters", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--lambda", type=float, dest="lam",
                       help="test-function norm penalty")
        p.add_argument("--mu", type=float, help="hypothesis norm penalty")
        p.add_argument("--norm-bound", type=float, dest="norm_bound")
        p.add_argument("--a-n", type=float, dest="a_n",
                       help="moment penalty multiplier (default 1)")
        p.add_argument("--gamma", type=float, help="RBF bandwidth")
        p.add_argument("--nystrom-m", type=int, dest="nystrom_m")
        p.add_argument("--nystrom-r", type=int, dest="nystrom_r")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int,
                       help="worker threads hint (default from "
                            "ROBUST_MOMENTS_THREADS); bench always runs "
                            "sequentially")
        if mode == "eval":
            p.add_argument("--model", help="model.npz produced by fit")
        if mode == "verify":
            p.add_argument("--inject-fault", action="store_true",
                           dest="inject_fault",
                           help="deliberately corrupt one check (self-test)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, DatasetFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.mode == "fit":
            return cmd_fit(cfg)
        if cfg.mode == "eval":
            return cmd_eval(cfg)
        if cfg.mode == "bench":
            return cmd_bench(cfg)
        return cmd_verify(cfg)
    except (ConfigError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
