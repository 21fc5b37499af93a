"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 configuration or flag error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import concentration
from .config import ExperimentConfig, load_config, parse_config
from .environments import Bernoulli, Deterministic, Uniform
from .errors import BanditError, ConfigError, InvalidArgument
from .export import export_results
from .rng import derive_run_rng
from .runner import run_experiment
from .safety import Mean, MeanVariance

logger = logging.getLogger("safebandit")

VERIFY_HEADER = ["kind", "n", "m", "delta", "trials", "violation_rate", "threshold"]


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _arm(text: str):
    kind, _, param = text.partition(":")
    try:
        if kind == "uniform" and not param:
            return Uniform()
        if kind == "bernoulli":
            return Bernoulli(float(param))
        if kind == "deterministic":
            return Deterministic(float(param))
    except (ValueError, BanditError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    raise argparse.ArgumentTypeError("arm must be 'uniform', 'bernoulli:P' or 'deterministic:R'")


def _add_run_flags(p: argparse.ArgumentParser, T: int, runs: int) -> None:
    p.add_argument("--T", type=_positive, default=T, help=f"horizon (default {T})")
    p.add_argument("--runs", type=_positive, default=runs, help=f"replications (default {runs})")
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--full-traces", action="store_true", help="record every step in trace files")
    p.add_argument("--plot", action="store_true", help="also render PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safebandit", description="Safety-aware bandit experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment described by a JSON config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_seed, help="override the config seed")
    p.add_argument("--out", help="override the config output directory")
    p.add_argument("--full-traces", action="store_true")
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("bench-two-arm", help="deterministic r vs Uniform(0,1): BESA+ against BESA")
    p.add_argument("--r", type=float, required=True)
    _add_run_flags(p, T=5000, runs=200)

    p = sub.add_parser("bench-mixture", help="k truncated-Gaussian-mixture arms under CVaR or mean-variance")
    p.add_argument("--k", type=int, default=20)
    risk = p.add_mutually_exclusive_group(required=True)
    risk.add_argument("--alpha", type=float, help="CVaR level; compares BESA+, BESA, MARAB")
    risk.add_argument("--rho", type=float, help="mean-variance trade-off; compares BESA+, BESA, MV-LCB, ExpExp")
    p.add_argument("--C", type=float, default=1.0, help="MARAB exploration constant (default 1)")
    _add_run_flags(p, T=5000, runs=10)

    p = sub.add_parser("bench-clinical", help="empirical arms from a CSV file under mean-variance regret")
    p.add_argument("--csv", required=True)
    p.add_argument("--value-column", required=True)
    p.add_argument("--group-column", required=True)
    p.add_argument("--rho", type=float, default=1.0)
    _add_run_flags(p, T=5000, runs=100)

    p = sub.add_parser("verify-bounds", help="Monte Carlo check of the McDiarmid deviation bounds")
    p.add_argument("--kind", nargs="+", choices=["iid", "subsample"], default=["iid", "subsample"])
    p.add_argument("--value-function", choices=["mean", "mean_variance"], default="mean")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--arm", type=_arm, help="'uniform', 'bernoulli:P' or 'deterministic:R' "
                   "(default bernoulli:0.5 for mean, uniform for mean_variance)")
    p.add_argument("--n", nargs="+", type=_positive, required=True)
    p.add_argument("--m", type=_positive, help="subsample size (default n // 2)")
    p.add_argument("--delta", nargs="+", type=float, default=[0.05])
    p.add_argument("--trials", type=_positive, default=20000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="CSV file (default stdout)")
    return parser


def _bench_config(args, environment: dict, value_function: dict, policies: list[dict], default_out: str) -> ExperimentConfig:
    return parse_config({
        "environment": environment,
        "value_function": value_function,
        "policies": policies,
        "horizon": args.T,
        "runs": args.runs,
        "seed": args.seed,
        "output": args.out or default_out,
        "full_traces": args.full_traces,
    })


def _config_from_args(args) -> ExperimentConfig:
    if args.command == "run":
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out:
            overrides["output"] = args.out
        if args.full_traces:
            overrides["full_traces"] = True
        return config.model_copy(update=overrides) if overrides else config
    if args.command == "bench-two-arm":
        return _bench_config(
            args, {"type": "two_arm", "r": args.r}, {"type": "mean"},
            [{"type": "besa_plus"}, {"type": "besa"}], f"results/two_arm_r{args.r:g}",
        )
    if args.command == "bench-mixture":
        if args.alpha is not None:
            vf = {"type": "cvar", "alpha": args.alpha}
            policies = [{"type": "besa_plus"}, {"type": "besa"}, {"type": "marab", "alpha": args.alpha, "C": args.C}]
            tag = f"cvar{args.alpha:g}"
        else:
            vf = {"type": "mean_variance", "rho": args.rho}
            policies = [{"type": "besa_plus"}, {"type": "besa"}, {"type": "mv_lcb", "rho": args.rho}, {"type": "expexp", "rho": args.rho}]
            tag = f"mv{args.rho:g}"
        return _bench_config(args, {"type": "mixture", "k": args.k}, vf, policies, f"results/mixture_k{args.k}_{tag}")
    # bench-clinical
    env = {"type": "csv", "path": args.csv, "value_column": args.value_column, "group_column": args.group_column}
    policies = [{"type": t} for t in ("besa_plus", "besa", "ucb1", "thompson")]
    policies += [{"type": "mv_lcb", "rho": args.rho}, {"type": "expexp", "rho": args.rho}]
    return _bench_config(args, env, {"type": "mean_variance", "rho": args.rho}, policies, "results/clinical")


def _verify_bounds(args) -> int:
    if args.value_function == "mean":
        svf, arm = Mean(), args.arm or Bernoulli(0.5)
    else:
        svf, arm = MeanVariance(args.rho), args.arm or Uniform()
    for d in args.delta:
        if not 0 < d < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {d}")
    rows = []
    for kind in args.kind:
        for n in args.n:
            m = None
            if kind == "subsample":
                m = args.m if args.m is not None else max(1, n // 2)
                if m > n:
                    raise ConfigError(f"--m {m} exceeds n = {n}")
            rng = derive_run_rng(args.seed, n, 0 if kind == "iid" else 1)
            try:
                rates = concentration.violation_rates(kind, svf, arm, n, m, args.delta, args.trials, rng)
            except InvalidArgument as exc:
                raise ConfigError(str(exc)) from None
            for d, rate in zip(args.delta, rates):
                thr = concentration.violation_threshold(d, args.trials)
                rows.append([kind, n, "" if m is None else m, repr(d), args.trials, repr(rate), repr(thr)])
                logger.info("%s n=%d m=%s delta=%g rate=%.5f threshold=%.5f %s", kind, n, m, d, rate, thr,
                            "ok" if rate <= thr else "VIOLATED")
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VERIFY_HEADER)
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.command == "verify-bounds":
            return _verify_bounds(args)
        config = _config_from_args(args)
        result = run_experiment(config)
        out = Path(config.output)
        export_results(result, out, plot=args.plot)
        print(f"wrote results to {out}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BanditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
