"""Concentration-bound calculators and Monte Carlo checks of them.

Covers McDiarmid tails for i.i.d. samples and for subsamples drawn without
replacement, the suboptimal-play threshold ``u_t = (16 gamma^2 / Delta^2) ln t``,
the ``beta(T, omega, C)`` series and a composite two-arm regret-bound curve.
All calculators are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .environments import ArmDistribution, true_value
from .errors import InvalidArgument
from .safety import SafetyValueFunction

_CHUNK_CELLS = 2_000_000


@dataclass(frozen=True)
class BoundParams:
    """Gap/sensitivity pair and the constants derived from it.

    ``omega = Delta^2 / (4 gamma^2)``, ``m = 16 gamma^2 / Delta^2``,
    ``kappa = omega / m`` and ``C = e^omega / (1 - e^(-3 omega))``.
    """

    delta_gap: float
    gamma: float
    horizon: int | None = None

    def __post_init__(self):
        if not (self.delta_gap > 0 and math.isfinite(self.delta_gap)):
            raise InvalidArgument(f"delta_gap must be positive, got {self.delta_gap}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidArgument(f"gamma must be positive, got {self.gamma}")

    @property
    def omega(self) -> float:
        return self.delta_gap**2 / (4 * self.gamma**2)

    @property
    def m(self) -> float:
        return 16 * self.gamma**2 / self.delta_gap**2

    @property
    def kappa(self) -> float:
        return self.omega / self.m

    @property
    def C(self) -> float:
        return math.exp(self.omega) / (1 - math.exp(-3 * self.omega))


def mcdiarmid_tail(n: int, c: float, eps: float) -> float:
    """``exp(-2 eps^2 / (n c^2))`` clamped to [0, 1]."""
    if n < 1 or c <= 0 or eps < 0:
        raise InvalidArgument("need n >= 1, c > 0, eps >= 0")
    if eps == 0:
        return 1.0
    return min(1.0, math.exp(-2 * eps * eps / (n * c * c)))


def mcdiarmid_deviation(n: int, gamma: float, delta: float) -> float:
    """Deviation ``gamma sqrt(ln(1/delta) / (2n))`` whose tail at ``c = gamma/n`` is ``delta``."""
    if n < 1 or gamma <= 0 or not 0 < delta < 1:
        raise InvalidArgument("need n >= 1, gamma > 0, 0 < delta < 1")
    return gamma * math.sqrt(math.log(1 / delta) / (2 * n))


def subsample_tail(m: int, n: int, c: float, eps: float) -> float:
    """``exp(-2 eps^2 / (min(m, n-m) c^2))`` for a size-``m`` subsample of ``n`` items.

    At ``m == n`` the subsample is the full set, so any positive deviation has
    probability 0.
    """
    if not 1 <= m <= n or c <= 0 or eps < 0:
        raise InvalidArgument("need 1 <= m <= n, c > 0, eps >= 0")
    if eps == 0:
        return 1.0
    k = min(m, n - m)
    if k == 0:
        return 0.0
    return min(1.0, math.exp(-2 * eps * eps / (k * c * c)))


def subsample_deviation(m: int, n: int, gamma: float, delta: float) -> float:
    """``gamma sqrt(min(m, n-m) ln(1/delta) / (2 m^2))``; the inverse of :func:`subsample_tail` at ``c = gamma/m``."""
    if not 1 <= m <= n or gamma <= 0 or not 0 < delta < 1:
        raise InvalidArgument("need 1 <= m <= n, gamma > 0, 0 < delta < 1")
    return gamma * math.sqrt(min(m, n - m) * math.log(1 / delta) / (2 * m * m))


def suboptimal_play_threshold(params: BoundParams, t: float) -> float:
    if t < 2:
        raise InvalidArgument(f"t must be >= 2, got {t}")
    return params.m * math.log(t)


def beta_series(params: BoundParams, t_start: int, T: int) -> float:
    """Direct sum of ``C exp(-kappa t / ln t) (1 - exp(-t omega))`` for ``t = t_start..T``."""
    if not 2 <= t_start <= T:
        raise InvalidArgument(f"need 2 <= t_start <= T, got t_start={t_start}, T={T}")
    C, kappa, omega = params.C, params.kappa, params.omega
    total = 0.0
    step = 1_000_000
    for lo in range(int(t_start), int(T) + 1, step):
        t = np.arange(lo, min(lo + step, int(T) + 1), dtype=float)
        total += float(np.sum(C * np.exp(-kappa * t / np.log(t)) * -np.expm1(-t * omega)))
    return total


def c_delta_gamma(params: BoundParams, T: int) -> float:
    """Burn-in ``max(ln T / kappa, exp(4 gamma^2 ln 2 / Delta^2), 3 u_T)``."""
    try:
        burn = math.exp(4 * params.gamma**2 * math.log(2) / params.delta_gap**2)
    except OverflowError:
        burn = math.inf
    return max(math.log(T) / params.kappa, burn, 3 * suboptimal_play_threshold(params, T))


def regret_bound_curve(params: BoundParams, T_grid: Iterable[int], cap: bool = False) -> list[float]:
    """Composite two-arm regret bound at each horizon in ``T_grid``.

    ``Delta * (sum_{t<=T} 2/t + u_T + c + beta(c..T) + ln T)`` with ``c`` from
    :func:`c_delta_gamma`; the beta sum is empty while ``c > T``. With
    ``cap=True`` each value is limited to the trivial bound ``Delta * T``,
    which is the form to overlay on simulated regret curves.
    """
    out = []
    d = params.delta_gap
    for T in T_grid:
        T = int(T)
        if T < 3:
            raise InvalidArgument(f"grid points must be >= 3, got {T}")
        harmonic = 2.0 * float(np.sum(1.0 / np.arange(1, T + 1)))
        c = c_delta_gamma(params, T)
        start = math.ceil(c) if math.isfinite(c) else T + 1
        beta = beta_series(params, max(2, start), T) if start <= T else 0.0
        value = d * (harmonic + suboptimal_play_threshold(params, T) + c + beta + math.log(T))
        out.append(min(value, d * T) if cap else value)
    return out


def violation_threshold(delta: float, trials: int) -> float:
    """Acceptance level: ``delta`` plus three binomial standard errors."""
    return delta + 3 * math.sqrt(delta * (1 - delta) / trials)


def _deviations(kind, svf, arm, n, m, trials, rng):
    """Per-trial ``(reference, estimate)`` pairs for the chosen bound."""
    rows_per_chunk = max(1, _CHUNK_CELLS // n)
    refs, ests = [], []
    done = 0
    while done < trials:
        rows = min(rows_per_chunk, trials - done)
        x = arm.sample_many(rng, (rows, n))
        full = svf.estimate_rows(x)
        if kind == "iid":
            ests.append(full)
        elif m == n:
            ests.append(full.copy())
            refs.append(full)
        else:
            ests.append(svf.estimate_rows(rng.permuted(x, axis=1)[:, :m]))
            refs.append(full)
        done += rows
    est = np.concatenate(ests)
    ref = np.concatenate(refs) if refs else None
    return ref, est


def violation_rates(
    kind: Literal["iid", "subsample"],
    svf: SafetyValueFunction,
    arm: ArmDistribution,
    n: int,
    m: int | None,
    deltas: Sequence[float],
    trials: int,
    rng: np.random.Generator,
) -> list[float]:
    """Violation rates for several ``delta`` levels over one shared set of trials.

    ``iid``: the estimate on ``n`` draws falls at least
    :func:`mcdiarmid_deviation` below the true value. ``subsample``: the
    estimate on a size-``m`` subsample falls at least
    :func:`subsample_deviation` below the full-sample estimate (a strictly
    positive drop is required, so ``m == n`` never violates).
    """
    if kind not in ("iid", "subsample"):
        raise InvalidArgument(f"kind must be 'iid' or 'subsample', got {kind!r}")
    if trials < 1000:
        raise InvalidArgument("trials must be at least 1000")
    if n < svf.min_samples():
        raise InvalidArgument(f"n must be at least {svf.min_samples()}")
    if kind == "subsample":
        if m is None or not svf.min_samples() <= m <= n:
            raise InvalidArgument(f"subsample size must satisfy {svf.min_samples()} <= m <= n, got {m}")
    ref, est = _deviations(kind, svf, arm, n, m, trials, rng)
    rates = []
    if kind == "iid":
        v = true_value(arm, svf).value
        for delta in deltas:
            eps = mcdiarmid_deviation(n, svf.gamma, delta)
            rates.append(float(np.mean(est <= v - eps)))
    else:
        drop = ref - est
        for delta in deltas:
            eps = subsample_deviation(m, n, svf.gamma, delta)
            rates.append(float(np.mean((drop >= eps) & (drop > 0))))
    return rates


def verify_bound_monte_carlo(
    kind: Literal["iid", "subsample"],
    svf: SafetyValueFunction,
    arm: ArmDistribution,
    n: int,
    m: int | None,
    delta: float,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Empirical violation rate of one bound; should not exceed :func:`violation_threshold`."""
    return violation_rates(kind, svf, arm, n, m, [delta], trials, rng)[0]
