"""Replicated bandit runs with safety-aware regret accounting.

Each ``(run_id, policy_index)`` pair gets its own stream
``derive_run_rng(seed, run_id, policy_index)``, so policies in one comparison
are not reward-coupled and results do not depend on how runs are scheduled
across workers. Regret is charged against true arm values computed once per
experiment.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, PolicySpec
from .environments import (
    Environment,
    TrueValue,
    arm_from_config,
    load_empirical_csv,
    make_mixture_benchmark,
    make_two_arm_benchmark,
    true_value,
)
from .errors import ConfigError, InvalidArgument
from .policies import make_policy
from .rng import derive_run_rng
from .safety import SafetyValueFunction

logger = logging.getLogger(__name__)

#: run_id reserved for environment construction (key path length differs from run streams)
ENV_STREAM = (1 << 64) - 1
FULL_CHECKPOINT_LIMIT = 10**4
MAX_CHECKPOINTS = 1000


@dataclass
class RegretTrace:
    """One run of one policy: per-step arm, reward and cumulative regret."""

    policy: str
    run_id: int
    arms: np.ndarray
    rewards: np.ndarray
    instant_regret: np.ndarray
    cum_regret: np.ndarray
    counts: np.ndarray
    optimal: np.ndarray  # per-step bool: an optimal arm was played

    @property
    def horizon(self) -> int:
        return int(self.arms.shape[0])

    @property
    def optimal_plays(self) -> int:
        return int(self.optimal.sum())

    def optimal_fraction(self, start: int = 1, stop: int | None = None) -> float:
        """Fraction of steps ``start..stop`` (1-based, inclusive) that played an optimal arm."""
        stop = self.horizon if stop is None else stop
        return float(self.optimal[start - 1 : stop].mean())


def checkpoints(horizon: int) -> np.ndarray:
    """Every step up to 10^4, else a geometric grid of at most 1000 steps ending at ``horizon``."""
    if horizon <= FULL_CHECKPOINT_LIMIT:
        return np.arange(1, horizon + 1)
    grid = np.unique(np.round(np.geomspace(1, horizon, MAX_CHECKPOINTS)).astype(np.int64))
    grid[-1] = horizon
    return grid


def build_environment(config: ExperimentConfig) -> Environment:
    spec = config.environment
    try:
        if spec.type == "two_arm":
            return make_two_arm_benchmark(spec.r)
        if spec.type == "mixture":
            return make_mixture_benchmark(spec.k, derive_run_rng(config.seed, ENV_STREAM))
        if spec.type == "csv":
            return load_empirical_csv(spec.path, spec.value_column, spec.group_column)
        arms = tuple(arm_from_config(a) for a in spec.arms)
        return Environment(arms, labels=tuple(spec.labels) if spec.labels else None)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class Experiment:
    """A validated config with its environment and true arm values resolved."""

    config: ExperimentConfig
    environment: Environment
    svf: SafetyValueFunction
    true_values: list[TrueValue]

    @classmethod
    def prepare(cls, config: ExperimentConfig) -> "Experiment":
        env = build_environment(config)
        svf = config.value_function.build()
        values = [true_value(arm, svf) for arm in env.arms]
        for i, tv in enumerate(values):
            logger.debug("arm %d true value %.6f (%s, ci %.2g)", i, tv.value, tv.method, tv.ci_halfwidth)
        return cls(config, env, svf, values)

    @property
    def values(self) -> np.ndarray:
        return np.array([tv.value for tv in self.true_values])

    @property
    def gaps(self) -> np.ndarray:
        v = self.values
        return v.max() - v

    @property
    def optimal_arms(self) -> np.ndarray:
        v = self.values
        return v == v.max()

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.config.policies]

    def run_episode(self, policy_index: int, run_id: int) -> RegretTrace:
        spec = self.config.policies[policy_index]
        T = self.config.horizon
        k = self.environment.k
        rng = derive_run_rng(self.config.seed, run_id, policy_index)
        policy = make_policy(spec.model_dump(exclude_none=True), k, self.svf, horizon=T)
        arms = np.empty(T, dtype=np.int64)
        rewards = np.empty(T)
        env_arms = self.environment.arms
        for t in range(1, T + 1):
            a = policy.select(t, rng)
            x = env_arms[a].sample(rng)
            policy.update(a, x, rng)
            arms[t - 1] = a
            rewards[t - 1] = x
        instant = self.gaps[arms]
        return RegretTrace(
            policy=spec.label,
            run_id=run_id,
            arms=arms,
            rewards=rewards,
            instant_regret=instant,
            cum_regret=np.cumsum(instant),
            counts=np.bincount(arms, minlength=k),
            optimal=self.optimal_arms[arms],
        )


def run_episode(config: ExperimentConfig, policy: PolicySpec | int, run_id: int) -> RegretTrace:
    """Run one policy of ``config`` once. ``policy`` is a spec from the config or its index."""
    index = policy if isinstance(policy, int) else config.policies.index(policy)
    return Experiment.prepare(config).run_episode(index, run_id)


@dataclass
class PolicySummary:
    label: str
    checkpoints: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    p10: np.ndarray
    p50: np.ndarray
    p90: np.ndarray
    optimal_play_pct: np.ndarray


@dataclass
class AggregateResult:
    config: ExperimentConfig
    true_values: list[TrueValue]
    checkpoints: np.ndarray
    summaries: dict[str, PolicySummary]
    traces: dict[str, list[RegretTrace]] = field(repr=False)
    environment_labels: tuple[str, ...] | None = None


def summarise(label: str, traces: list[RegretTrace], grid: np.ndarray) -> PolicySummary:
    idx = grid - 1
    regret = np.stack([tr.cum_regret[idx] for tr in traces])
    optimal = np.stack([np.cumsum(tr.optimal)[idx] / grid for tr in traces])
    std = regret.std(axis=0, ddof=1) if len(traces) > 1 else np.zeros(len(grid))
    p10, p50, p90 = np.percentile(regret, [10, 50, 90], axis=0)
    return PolicySummary(label, grid, regret.mean(axis=0), std, p10, p50, p90, 100.0 * optimal.mean(axis=0))


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit value, else ``BANDIT_THREADS``, else the CPU count."""
    if workers is None:
        env = os.environ.get("BANDIT_THREADS")
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"BANDIT_THREADS must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    return max(1, workers)


_WORKER_EXPERIMENT: Experiment | None = None


def _init_worker(experiment: Experiment) -> None:
    global _WORKER_EXPERIMENT
    _WORKER_EXPERIMENT = experiment


def _run_task(task: tuple[int, int]) -> RegretTrace:
    return _WORKER_EXPERIMENT.run_episode(*task)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> AggregateResult:
    """Run every policy ``config.runs`` times and aggregate at the checkpoints.

    Traces are reduced in ``(policy, run_id)`` order whatever the completion
    order, so the result is identical for any worker count.
    """
    experiment = Experiment.prepare(config)
    tasks = [(p, r) for p in range(len(config.policies)) for r in range(config.runs)]
    n_workers = min(resolve_workers(workers), len(tasks))
    logger.info("running %d episodes on %d worker(s)", len(tasks), n_workers)
    if n_workers == 1:
        results = [experiment.run_episode(*task) for task in tasks]
    else:
        with ProcessPoolExecutor(n_workers, initializer=_init_worker, initargs=(experiment,)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * n_workers))))
    grid = checkpoints(config.horizon)
    traces: dict[str, list[RegretTrace]] = {}
    for (p, _), trace in zip(tasks, results):
        traces.setdefault(config.policies[p].label, []).append(trace)
    summaries = {label: summarise(label, trs, grid) for label, trs in traces.items()}
    return AggregateResult(config, experiment.true_values, grid, summaries, traces, experiment.environment.labels)
