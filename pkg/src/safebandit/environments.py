"""Arm reward models, benchmark environments and true safety values.

All arms emit rewards in ``[0, 1]``. Arms and environments are immutable;
sampling only advances the caller's generator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument, SamplingFailure
from .rng import derive_run_rng
from .safety import CVaR, MeanVariance, SafetyValueFunction

MAX_REJECTION_ATTEMPTS = 10**6
TRUE_VALUE_MC_SAMPLES = 10**6
N_CLINICAL_BUCKETS = 10
# fixed key path for Monte Carlo true values, so they do not move with the run seed
_TRUE_VALUE_STREAM = (0, (1 << 64) - 2)


class ArmDistribution:
    kind: str = ""

    def sample(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def sample_many(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Deterministic(ArmDistribution):
    r: float
    kind = "deterministic"

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise InvalidArgument(f"deterministic reward must lie in [0, 1], got {self.r}")

    def sample(self, rng):
        return self.r

    def sample_many(self, rng, size):
        return np.full(size, self.r, dtype=float)

    def to_config(self):
        return {"type": self.kind, "r": self.r}


@dataclass(frozen=True)
class Uniform(ArmDistribution):
    lo: float = 0.0
    hi: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise InvalidArgument(f"uniform bounds must satisfy 0 <= lo <= hi <= 1, got ({self.lo}, {self.hi})")

    def sample(self, rng):
        return self.lo + (self.hi - self.lo) * rng.random()

    def sample_many(self, rng, size):
        return self.lo + (self.hi - self.lo) * rng.random(size)

    def to_config(self):
        return {"type": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Bernoulli(ArmDistribution):
    p: float
    kind = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidArgument(f"bernoulli p must lie in [0, 1], got {self.p}")

    def sample(self, rng):
        return 1.0 if rng.random() < self.p else 0.0

    def sample_many(self, rng, size):
        return (rng.random(size) < self.p).astype(float)

    def to_config(self):
        return {"type": self.kind, "p": self.p}


@dataclass(frozen=True)
class TruncatedGaussianMixture(ArmDistribution):
    """Gaussian mixture conditioned on ``[0, 1]``.

    Draws come from the untruncated mixture and are rejected until one lands
    in ``[0, 1]``; the result has density proportional to the mixture density
    on the interval (no boundary atoms, unlike clipping).

    Attributes:
        components: tuple of ``(weight, mean, std)`` triples.
    """

    components: tuple[tuple[float, float, float], ...]
    kind = "truncated_gaussian_mixture"

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps or any(len(c) != 3 for c in comps):
            raise InvalidArgument("components must be a nonempty list of (weight, mean, std)")
        weights = [c[0] for c in comps]
        if min(weights) < 0 or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise InvalidArgument("mixture weights must be nonnegative and sum to 1")
        if any(not (c[2] > 0 and math.isfinite(c[1])) for c in comps):
            raise InvalidArgument("component stds must be positive and means finite")

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def stds(self) -> np.ndarray:
        return np.array([c[2] for c in self.components])

    def sample(self, rng):
        cdf = np.cumsum(self.weights)
        for _ in range(MAX_REJECTION_ATTEMPTS):
            i = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)
            _, mu, sd = self.components[i]
            x = rng.normal(mu, sd)
            if 0.0 <= x <= 1.0:
                return float(x)
        raise SamplingFailure(f"no draw in [0, 1] after {MAX_REJECTION_ATTEMPTS} attempts for {self}")

    def sample_many(self, rng, size):
        total = int(np.prod(size))
        out = np.empty(total)
        filled = 0
        weights, means, stds = self.weights, self.means, self.stds
        while filled < total:
            batch = max(1024, 2 * (total - filled))
            idx = rng.choice(len(weights), size=batch, p=weights)
            x = rng.normal(means[idx], stds[idx])
            x = x[(x >= 0.0) & (x <= 1.0)]
            if x.size == 0 and batch >= MAX_REJECTION_ATTEMPTS:
                raise SamplingFailure(f"no draw in [0, 1] among {batch} attempts for {self}")
            take = min(x.size, total - filled)
            out[filled:filled + take] = x[:take]
            filled += take
        return out.reshape(size)

    def density(self, x) -> np.ndarray:
        """Untruncated mixture density (the truncated one is this over its mass on [0, 1])."""
        x = np.asarray(x, dtype=float)[..., None]
        z = (x - self.means) / self.stds
        return np.sum(self.weights * np.exp(-0.5 * z * z) / (self.stds * math.sqrt(2 * math.pi)), axis=-1)

    def to_config(self):
        return {"type": self.kind, "components": [list(c) for c in self.components]}


@dataclass(frozen=True)
class Empirical(ArmDistribution):
    """Resamples uniformly, with replacement, from a recorded list."""

    samples: tuple[float, ...]
    kind = "empirical"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.samples)
        object.__setattr__(self, "samples", vals)
        if not vals:
            raise InvalidArgument("empirical arm needs at least one sample")
        if not all(0.0 <= v <= 1.0 for v in vals):
            raise InvalidArgument("empirical samples must lie in [0, 1]")

    def sample(self, rng):
        return self.samples[int(rng.integers(len(self.samples)))]

    def sample_many(self, rng, size):
        return np.asarray(self.samples)[rng.integers(len(self.samples), size=size)]

    def to_config(self):
        return {"type": self.kind, "samples": list(self.samples)}


def sample(arm: ArmDistribution, rng: np.random.Generator) -> float:
    return arm.sample(rng)


def arm_from_config(spec: dict) -> ArmDistribution:
    spec = dict(spec)
    kind = spec.pop("type", None)
    builders = {
        "deterministic": Deterministic,
        "uniform": Uniform,
        "bernoulli": Bernoulli,
        "truncated_gaussian_mixture": lambda components: TruncatedGaussianMixture(tuple(map(tuple, components))),
        "empirical": lambda samples: Empirical(tuple(samples)),
    }
    if kind not in builders:
        raise InvalidArgument(f"unknown arm type {kind!r}")
    try:
        return builders[kind](**spec)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for {kind} arm: {exc}") from None


@dataclass(frozen=True)
class Environment:
    arms: tuple[ArmDistribution, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if len(self.arms) < 2:
            raise InvalidArgument("an environment needs at least 2 arms")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.arms):
                raise InvalidArgument("labels must match arms one to one")

    @property
    def k(self) -> int:
        return len(self.arms)


def make_two_arm_benchmark(r: float) -> Environment:
    """Deterministic ``r`` against Uniform(0, 1); the uniform arm is optimal under the mean."""
    if not 0.0 <= r < 0.5:
        raise InvalidArgument(f"r must lie in [0, 0.5), got {r}")
    return Environment((Deterministic(r), Uniform(0.0, 1.0)), labels=(f"deterministic_{r:g}", "uniform"))


def make_mixture_benchmark(k: int, rng: np.random.Generator) -> Environment:
    """``k`` arms, each an equal-weight mixture of four truncated Gaussians.

    Component means are drawn from U[0, 1] and stds from U[0.5, 1].
    """
    if k < 2:
        raise InvalidArgument(f"k must be at least 2, got {k}")
    arms = []
    for _ in range(k):
        means = rng.uniform(0.0, 1.0, 4)
        stds = rng.uniform(0.5, 1.0, 4)
        arms.append(TruncatedGaussianMixture(tuple((0.25, float(m), float(s)) for m, s in zip(means, stds))))
    return Environment(tuple(arms), labels=tuple(f"arm{i}" for i in range(k)))


def bucket_rewards(values: Sequence[float], n_buckets: int = N_CLINICAL_BUCKETS) -> np.ndarray:
    """Map raw values to midpoint rewards of equal-width buckets over their range.

    Bucket ``i`` in ``1..n_buckets`` becomes ``(i - 0.5) / n_buckets``. The
    maximum falls in the top bucket; a zero-width range puts everything in
    bucket 1.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        idx = np.ones(v.shape, dtype=int)
    else:
        idx = np.minimum(np.floor((v - lo) / (hi - lo) * n_buckets).astype(int) + 1, n_buckets)
    return (idx - 0.5) / n_buckets


def load_empirical_csv(path, column: str, group_column: str) -> Environment:
    """One Empirical arm per group, rewards bucketed over the pooled range.

    Groups keep their order of first appearance. Columns other than the two
    named ones (censoring flags included) are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidArgument(f"no such file: {path}")
    groups: dict[str, list[float]] = {}
    bad_rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InvalidArgument(f"{path}: missing header row")
        for col in (column, group_column):
            if col not in reader.fieldnames:
                raise InvalidArgument(f"{path}: no column {col!r} in header {reader.fieldnames}")
        for row_no, row in enumerate(reader, start=2):
            raw = (row.get(column) or "").strip()
            group = (row.get(group_column) or "").strip()
            try:
                value = float(raw)
            except ValueError:
                bad_rows.append(row_no)
                continue
            if not math.isfinite(value) or not group:
                bad_rows.append(row_no)
                continue
            groups.setdefault(group, []).append(value)
    if bad_rows:
        raise InvalidArgument(f"{path}: unparseable rows {bad_rows}")
    if len(groups) < 2:
        raise InvalidArgument(f"{path}: fewer than 2 groups in column {group_column!r}")
    labels = list(groups)
    pooled = np.concatenate([groups[g] for g in labels])
    rewards = bucket_rewards(pooled)
    arms, start = [], 0
    for g in labels:
        stop = start + len(groups[g])
        arms.append(Empirical(tuple(rewards[start:stop].tolist())))
        start = stop
    return Environment(tuple(arms), labels=tuple(labels))


class TrueValue(NamedTuple):
    value: float
    method: Literal["analytic", "monte_carlo"]
    ci_halfwidth: float


_Z95 = 1.959963984540054


def _analytic_moments(arm: ArmDistribution) -> tuple[float, float] | None:
    if isinstance(arm, Deterministic):
        return arm.r, 0.0
    if isinstance(arm, Uniform):
        return (arm.lo + arm.hi) / 2, (arm.hi - arm.lo) ** 2 / 12
    if isinstance(arm, Bernoulli):
        return arm.p, arm.p * (1 - arm.p)
    if isinstance(arm, Empirical):
        x = np.asarray(arm.samples)
        mean = math.fsum(arm.samples) / x.size
        return mean, math.fsum(((x - mean) ** 2).tolist()) / x.size
    return None


def _analytic_cvar(arm: ArmDistribution, alpha: float) -> float | None:
    if isinstance(arm, Deterministic):
        return arm.r
    if isinstance(arm, Uniform):
        return arm.lo + alpha * (arm.hi - arm.lo) / 2
    if isinstance(arm, Bernoulli):
        q0 = 1.0 - arm.p
        return 0.0 if alpha <= q0 else (alpha - q0) / alpha
    if isinstance(arm, Empirical):
        return CVaR(alpha).estimate(arm.samples)
    return None


def _monte_carlo(arm, svf, rng, n) -> TrueValue:
    x = arm.sample_many(rng, n)
    if isinstance(svf, CVaR):
        k = svf.tail_count(n)
        tail = np.sort(x)[:k]
        value = float(tail.mean())
        var_at_risk = float(tail[-1])
        # asymptotic variance of the lower-tail average estimator
        asym_var = (tail.var() + (1 - svf.alpha) * (var_at_risk - value) ** 2) / svf.alpha
        return TrueValue(value, "monte_carlo", _Z95 * math.sqrt(asym_var / n))
    mean = float(x.mean())
    if isinstance(svf, MeanVariance):
        influence = x - svf.rho * (x - mean) ** 2
        value = mean - svf.rho * float(x.var())
        return TrueValue(value, "monte_carlo", _Z95 * float(influence.std()) / math.sqrt(n))
    return TrueValue(mean, "monte_carlo", _Z95 * float(x.std()) / math.sqrt(n))


def true_value(
    arm: ArmDistribution,
    svf: SafetyValueFunction,
    rng: np.random.Generator | None = None,
    *,
    method: Literal["auto", "monte_carlo"] = "auto",
    n_samples: int = TRUE_VALUE_MC_SAMPLES,
) -> TrueValue:
    """Score ``arm`` under ``svf``; closed form when one exists, else Monte Carlo.

    Mean-variance scores always use the population variance. Monte Carlo uses
    the value function's own estimator on ``n_samples`` draws and reports a
    95% normal-approximation half-width. Without ``rng`` a fixed stream is
    used, so repeated calls agree.
    """
    if method == "auto":
        if isinstance(svf, CVaR):
            v = _analytic_cvar(arm, svf.alpha)
            if v is not None:
                return TrueValue(float(v), "analytic", 0.0)
        else:
            moments = _analytic_moments(arm)
            if moments is not None:
                mean, var = moments
                v = mean - svf.rho * var if isinstance(svf, MeanVariance) else mean
                return TrueValue(float(v), "analytic", 0.0)
    elif method != "monte_carlo":
        raise InvalidArgument(f"unknown method {method!r}")
    if rng is None:
        rng = derive_run_rng(*_TRUE_VALUE_STREAM)
    return _monte_carlo(arm, svf, rng, n_samples)


__all__ = [
    "ArmDistribution", "Deterministic", "Uniform", "Bernoulli", "TruncatedGaussianMixture", "Empirical",
    "Environment", "TrueValue", "sample", "arm_from_config", "make_two_arm_benchmark",
    "make_mixture_benchmark", "load_empirical_csv", "bucket_rewards", "true_value",
]
