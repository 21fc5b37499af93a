"""Safety value functions: distribution scores, their sample estimators, and
the bounded-difference constants used by the concentration bounds.

A safety value function scores a reward distribution on ``[0, 1]``; higher is
better. Each instance exposes ``gamma``, a constant such that replacing one of
``n`` samples moves ``estimate`` by at most ``gamma / n``.

Estimators are exactly permutation invariant: sums go through
:func:`math.fsum`, which is correctly rounded and therefore order independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import InvalidArgument


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgument("samples must be a nonempty 1-d sequence")
    # `not (min >= 0)` also rejects NaN
    if not (x.min() >= 0.0 and x.max() <= 1.0):
        raise InvalidArgument("samples must lie in [0, 1]")
    return x


class SafetyValueFunction:
    """Common surface of the concrete value functions."""

    name: str = ""

    @property
    def gamma(self) -> float:
        raise NotImplementedError

    def min_samples(self) -> int:
        return 1

    def estimate(self, samples) -> float:
        x = _as_samples(samples)
        if x.size < self.min_samples():
            raise InvalidArgument(f"{self.name} estimator needs at least {self.min_samples()} samples")
        return self.estimate_trusted(x)

    def estimate_trusted(self, x: np.ndarray) -> float:
        """Estimate from a float array already known to be valid (no checks)."""
        raise NotImplementedError

    def estimate_rows(self, matrix: np.ndarray) -> np.ndarray:
        """Row-wise estimate over a 2-d array (vectorised, for Monte Carlo)."""
        raise NotImplementedError

    def bounded_difference(self, n: int) -> float:
        if n < self.min_samples():
            raise InvalidArgument(f"{self.name} needs n >= {self.min_samples()}, got {n}")
        return self.gamma / n

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Mean(SafetyValueFunction):
    name = "mean"

    @property
    def gamma(self) -> float:
        return 1.0

    def estimate_trusted(self, x: np.ndarray) -> float:
        return math.fsum(x.tolist()) / x.size

    def estimate_rows(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=float).mean(axis=1)

    def to_config(self) -> dict[str, Any]:
        return {"type": "mean"}


@dataclass(frozen=True)
class MeanVariance(SafetyValueFunction):
    """Score ``mu - rho * sigma^2``.

    ``estimator_form="biased"`` divides the squared deviations by ``n``;
    ``"unbiased"`` divides by ``n - 1`` and needs at least two samples.

    ``gamma = 1 + rho`` for both forms. Writing the biased variance as
    ``((n-1)/n) var_others + ((n-1)/n^2) (x_i - mean_others)^2`` shows one
    replacement moves it by at most ``(n-1)/n^2``, so the estimator moves by
    at most ``(1 + rho (n-1)/n) / n``. That reaches ``(1 + rho/2) / n`` only
    at ``n = 2``. The unbiased form attains ``(1 + rho) / n`` exactly.
    """

    rho: float = 1.0
    estimator_form: str = "biased"
    name = "mean_variance"

    def __post_init__(self):
        if not (self.rho >= 0.0 and math.isfinite(self.rho)):
            raise InvalidArgument(f"rho must be a finite nonnegative real, got {self.rho}")
        if self.estimator_form not in ("biased", "unbiased"):
            raise InvalidArgument(f"estimator_form must be 'biased' or 'unbiased', got {self.estimator_form!r}")

    @property
    def gamma(self) -> float:
        return 1.0 + self.rho

    def min_samples(self) -> int:
        return 2 if self.estimator_form == "unbiased" else 1

    def estimate_trusted(self, x: np.ndarray) -> float:
        n = x.size
        mean = math.fsum(x.tolist()) / n
        if self.rho == 0.0:
            return mean
        ddof = 1 if self.estimator_form == "unbiased" else 0
        var = math.fsum(((x - mean) ** 2).tolist()) / (n - ddof)
        return mean - self.rho * var

    def estimate_rows(self, matrix: np.ndarray) -> np.ndarray:
        m = np.asarray(matrix, dtype=float)
        ddof = 1 if self.estimator_form == "unbiased" else 0
        return m.mean(axis=1) - self.rho * m.var(axis=1, ddof=ddof)

    def to_config(self) -> dict[str, Any]:
        return {"type": "mean_variance", "rho": self.rho, "estimator_form": self.estimator_form}


@dataclass(frozen=True)
class CVaR(SafetyValueFunction):
    """Lower-tail conditional value at risk at level ``alpha``.

    Estimated by the average of the ``ceil(n * alpha)`` smallest samples.
    Replacing one sample moves that average by at most ``1 / ceil(n alpha)``,
    which is at most ``1 / (n alpha)``, hence ``gamma = 1 / alpha``.
    """

    alpha: float = 0.1
    name = "cvar"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def gamma(self) -> float:
        return 1.0 / self.alpha

    def tail_count(self, n: int) -> int:
        # tolerance absorbs products like 0.05 * 60 == 3.0000000000000004
        return min(n, max(1, math.ceil(n * self.alpha - 1e-9)))

    def estimate_trusted(self, x: np.ndarray) -> float:
        k = self.tail_count(x.size)
        tail = np.partition(x, k - 1)[:k] if k < x.size else x
        return math.fsum(tail.tolist()) / k

    def estimate_rows(self, matrix: np.ndarray) -> np.ndarray:
        m = np.asarray(matrix, dtype=float)
        k = self.tail_count(m.shape[1])
        return np.sort(m, axis=1)[:, :k].mean(axis=1)

    def to_config(self) -> dict[str, Any]:
        return {"type": "cvar", "alpha": self.alpha}


def estimate(svf: SafetyValueFunction, samples) -> float:
    return svf.estimate(samples)


def bounded_difference(svf: SafetyValueFunction, n: int) -> float:
    """Worst-case single-coordinate sensitivity ``gamma / n``."""
    return svf.bounded_difference(n)


def from_config(spec: Mapping[str, Any]) -> SafetyValueFunction:
    """Build a value function from ``{type: mean|mean_variance|cvar, rho?, alpha?, estimator_form?}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    allowed = {"mean": set(), "mean_variance": {"rho", "estimator_form"}, "cvar": {"alpha"}}
    if kind not in allowed:
        raise InvalidArgument(f"unknown value function type {kind!r}")
    unknown = set(spec) - allowed[kind]
    if unknown:
        raise InvalidArgument(f"unknown keys for {kind}: {sorted(unknown)}")
    if kind == "mean":
        return Mean()
    if kind == "mean_variance":
        return MeanVariance(rho=float(spec.get("rho", 1.0)), estimator_form=spec.get("estimator_form", "biased"))
    return CVaR(alpha=float(spec.get("alpha", 0.1)))
