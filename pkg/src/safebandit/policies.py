"""Arm-selection policies.

BESA+ and BESA decide between two arms by a duel on equal-size subsamples of
their histories and extend to ``k`` arms with a single-elimination
tournament. BESA+ adds forced exploration of any arm pulled fewer than
``ln(t)`` times. The baselines (UCB1, Thompson sampling, MV-LCB, ExpExp,
MARAB) use their standard textbook indices and exist for comparison.

Policies own their per-arm histories. ``select(t, rng)`` is called with the
1-based step index; ``update`` records the observed reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidState
from .rng import subsample_without_replacement
from .safety import CVaR, MeanVariance, SafetyValueFunction


class ArmHistory:
    """Append-only record of one arm's rewards."""

    __slots__ = ("_buf", "_n", "_sum", "_sumsq")

    def __init__(self, rewards: Sequence[float] = ()):
        self._buf = np.empty(max(16, len(rewards)))
        self._n = 0
        self._sum = 0.0
        self._sumsq = 0.0
        for r in rewards:
            self.append(r)

    def append(self, reward: float) -> None:
        reward = float(reward)
        if not 0.0 <= reward <= 1.0:
            raise InvalidArgument(f"reward must lie in [0, 1], got {reward}")
        if self._n == self._buf.shape[0]:
            self._buf = np.concatenate([self._buf, np.empty(self._n)])
        self._buf[self._n] = reward
        self._n += 1
        self._sum += reward
        self._sumsq += reward * reward

    @property
    def rewards(self) -> np.ndarray:
        view = self._buf[: self._n]
        view.flags.writeable = False
        return view

    @property
    def count(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def mean(self) -> float:
        return self._sum / self._n

    @property
    def var(self) -> float:
        """Biased (divide-by-n) variance from running sums."""
        m = self._sum / self._n
        return max(0.0, self._sumsq / self._n - m * m)


def _subsampled_duel(a: int, b: int, histories, svf: SafetyValueFunction, rng) -> int:
    ha, hb = histories[a], histories[b]
    na, nb = ha.count, hb.count
    n = min(na, nb)
    if n < svf.min_samples():
        raise InvalidState(f"duel needs at least {svf.min_samples()} pulls per arm")
    # I(N, N) is the whole history; estimators are permutation invariant.
    # Histories are validated on append, so the unchecked estimate is safe.
    sa = ha.rewards if na == n else subsample_without_replacement(ha.rewards, n, rng)
    sb = hb.rewards if nb == n else subsample_without_replacement(hb.rewards, n, rng)
    assert len(sa) == len(sb) == n
    va, vb = svf.estimate_trusted(sa), svf.estimate_trusted(sb)
    if va != vb:
        return a if va > vb else b
    if na != nb:
        return a if na < nb else b
    return a if rng.random() < 0.5 else b


def besa_plus_duel(a: int, b: int, histories, t: int, svf: SafetyValueFunction, rng) -> int:
    """Two-arm BESA+ step.

    Forced exploration is checked for ``a`` first, then ``b``: an arm with no
    pulls or fewer than ``ln(t)`` pulls is returned immediately (estimators
    needing two samples raise that floor to two). Otherwise both
    histories are subsampled down to the smaller count and the higher estimate
    wins. Ties go to the arm with fewer pulls, then to a fair coin.
    """
    if t < 1:
        raise InvalidArgument(f"t must be >= 1, got {t}")
    floor = max(math.log(t), svf.min_samples() - 0.5)
    n_a, n_b = len(histories[a]), len(histories[b])
    if n_a == 0 or n_a < floor:
        return a
    if n_b == 0 or n_b < floor:
        return b
    return _subsampled_duel(a, b, histories, svf, rng)


def besa_duel(a: int, b: int, histories, svf: SafetyValueFunction, rng) -> int:
    """Original BESA duel: the BESA+ comparison without forced exploration."""
    if len(histories[a]) == 0 or len(histories[b]) == 0:
        raise InvalidState("BESA duel on an arm with an empty history; pull every arm once first")
    return _subsampled_duel(a, b, histories, svf, rng)


@dataclass
class TournamentResult:
    winner: int
    # one list per round; a bye is recorded as (arm, None)
    rounds: list[list[tuple[int, int | None]]] = field(default_factory=list)

    @property
    def n_duels(self) -> int:
        return sum(1 for rnd in self.rounds for _, b in rnd if b is not None)


def tournament(arms: Sequence[int], histories, t: int, svf: SafetyValueFunction, rng, duel: str = "besa_plus") -> TournamentResult:
    """Single-elimination bracket over ``arms`` in shuffled order.

    An odd arm out in any round gets a bye. ``k`` arms take ``ceil(log2 k)``
    rounds and ``k - 1`` duels.
    """
    arms = list(arms)
    if not arms:
        raise InvalidArgument("tournament needs at least one arm")
    if duel == "besa_plus":
        play: Callable[[int, int], int] = lambda a, b: besa_plus_duel(a, b, histories, t, svf, rng)
    elif duel == "besa":
        play = lambda a, b: besa_duel(a, b, histories, svf, rng)
    else:
        raise InvalidArgument(f"unknown duel {duel!r}")
    if len(arms) == 1:
        return TournamentResult(arms[0])
    order = [arms[i] for i in rng.permutation(len(arms))]
    rounds = []
    while len(order) > 1:
        matches, winners = [], []
        for i in range(0, len(order) - 1, 2):
            a, b = order[i], order[i + 1]
            matches.append((a, b))
            winners.append(play(a, b))
        if len(order) % 2:
            matches.append((order[-1], None))
            winners.append(order[-1])
        rounds.append(matches)
        order = winners
    return TournamentResult(order[0], rounds)


def tournament_select(arms, histories, t, svf, rng, duel: str = "besa_plus") -> int:
    return tournament(arms, histories, t, svf, rng, duel).winner


class Policy:
    name = "policy"

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise InvalidArgument("a policy needs at least one arm")
        self.n_arms = n_arms
        self.histories = [ArmHistory() for _ in range(n_arms)]

    @property
    def counts(self) -> list[int]:
        return [len(h) for h in self.histories]

    def select(self, t: int, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float, rng: np.random.Generator) -> None:
        self.histories[arm].append(reward)

    def _first_unplayed(self, at_least: int = 1) -> int | None:
        for i, h in enumerate(self.histories):
            if len(h) < at_least:
                return i
        return None


class BesaPlus(Policy):
    """BESA+ with a pluggable safety value function.

    Two arms run the literal two-arm rule with arm 0 as ``a``. With more arms
    any arm below the ``ln(t)`` exploration floor is pulled first (the least
    pulled one, lowest index on ties); otherwise a tournament decides.
    """

    name = "besa_plus"

    def __init__(self, n_arms: int, svf: SafetyValueFunction):
        super().__init__(n_arms)
        self.svf = svf

    def select(self, t, rng):
        if self.n_arms == 1:
            return 0
        if self.n_arms == 2:
            return besa_plus_duel(0, 1, self.histories, t, self.svf, rng)
        floor = max(math.log(t), self.svf.min_samples() - 0.5)
        counts = self.counts
        starved = [i for i, n in enumerate(counts) if n == 0 or n < floor]
        if starved:
            return min(starved, key=lambda i: (counts[i], i))
        return tournament_select(range(self.n_arms), self.histories, t, self.svf, rng, "besa_plus")


class Besa(Policy):
    """Original BESA: pull every arm once (twice for estimators that need it), then tournament."""

    name = "besa"

    def __init__(self, n_arms: int, svf: SafetyValueFunction):
        super().__init__(n_arms)
        self.svf = svf

    def select(self, t, rng):
        arm = self._first_unplayed(self.svf.min_samples())
        if arm is not None:
            return arm
        return tournament_select(range(self.n_arms), self.histories, t, self.svf, rng, "besa")


class UCB1(Policy):
    """Argmax of empirical mean plus ``sqrt(2 ln t / N)``."""

    name = "ucb1"

    def select(self, t, rng):
        arm = self._first_unplayed()
        if arm is not None:
            return arm
        counts = np.array(self.counts, dtype=float)
        means = np.array([h.mean for h in self.histories])
        return int(np.argmax(means + np.sqrt(2.0 * math.log(t) / counts)))


class Thompson(Policy):
    """Beta-Bernoulli Thompson sampling; each reward is binarised by one Bernoulli(reward) draw."""

    name = "thompson"

    def __init__(self, n_arms: int):
        super().__init__(n_arms)
        self.successes = np.zeros(n_arms)
        self.failures = np.zeros(n_arms)

    def select(self, t, rng):
        arm = self._first_unplayed()
        if arm is not None:
            return arm
        return int(np.argmax(rng.beta(1.0 + self.successes, 1.0 + self.failures)))

    def update(self, arm, reward, rng):
        super().update(arm, reward, rng)
        if rng.random() < reward:
            self.successes[arm] += 1
        else:
            self.failures[arm] += 1


class MVLCB(Policy):
    """Lower confidence bound on the variance-first measure ``sigma^2 - rho mu``.

    Index ``sigma^2 - rho mu - (5 + rho) sqrt(ln(1/delta_t) / (2N))`` with
    ``delta_t = 1/t^2``; the smallest index is played.
    """

    name = "mv_lcb"

    def __init__(self, n_arms: int, rho: float = 1.0):
        super().__init__(n_arms)
        self.rho = rho

    def select(self, t, rng):
        arm = self._first_unplayed()
        if arm is not None:
            return arm
        counts = np.array(self.counts, dtype=float)
        mv = np.array([h.var - self.rho * h.mean for h in self.histories])
        width = (5.0 + self.rho) * np.sqrt(2.0 * math.log(t) / (2.0 * counts))
        return int(np.argmin(mv - width))


class ExpExp(Policy):
    """Explore uniformly at random for ``tau`` steps, then commit to the smallest empirical ``sigma^2 - rho mu``."""

    name = "expexp"

    def __init__(self, n_arms: int, rho: float = 1.0, tau: int = 1000):
        super().__init__(n_arms)
        if tau < 0:
            raise InvalidArgument("tau must be nonnegative")
        self.rho = rho
        self.tau = tau
        self.committed: int | None = None

    @staticmethod
    def default_tau(horizon: int | None) -> int:
        return 1000 if horizon is None else max(1, math.ceil((horizon / 14.0) ** (2.0 / 3.0)))

    def select(self, t, rng):
        if t <= self.tau:
            return int(rng.integers(self.n_arms))
        if self.committed is None:
            arm = self._first_unplayed()
            if arm is not None:
                return arm
            mv = np.array([h.var - self.rho * h.mean for h in self.histories])
            self.committed = int(np.argmin(mv))
        return self.committed


class MARAB(Policy):
    """Argmax of empirical CVaR plus ``C sqrt(ln t / N)``."""

    name = "marab"

    def __init__(self, n_arms: int, alpha: float = 0.1, C: float = 1.0):
        super().__init__(n_arms)
        self.cvar = CVaR(alpha)
        self.C = C
        self._cache: list[float | None] = [None] * n_arms

    def select(self, t, rng):
        arm = self._first_unplayed()
        if arm is not None:
            return arm
        for i, v in enumerate(self._cache):
            if v is None:
                self._cache[i] = self.cvar.estimate(self.histories[i].rewards)
        counts = np.array(self.counts, dtype=float)
        return int(np.argmax(np.array(self._cache) + self.C * np.sqrt(math.log(t) / counts)))

    def update(self, arm, reward, rng):
        super().update(arm, reward, rng)
        self._cache[arm] = None


POLICY_TYPES = ("besa_plus", "besa", "ucb1", "thompson", "mv_lcb", "expexp", "marab")


def make_policy(spec: dict, n_arms: int, svf: SafetyValueFunction, horizon: int | None = None) -> Policy:
    """Build a policy from ``{type, params...}``.

    Unset risk parameters follow the governing value function: MV-LCB and
    ExpExp take its ``rho`` and MARAB its ``alpha`` when those exist.
    """
    spec = dict(spec)
    kind = spec.pop("type", None)
    spec.pop("name", None)
    allowed = {
        "besa_plus": set(), "besa": set(), "ucb1": set(), "thompson": set(),
        "mv_lcb": {"rho"}, "expexp": {"rho", "tau"}, "marab": {"alpha", "C"},
    }
    if kind not in allowed:
        raise InvalidArgument(f"unknown policy type {kind!r}")
    params = {k: v for k, v in spec.items() if v is not None}
    unknown = set(params) - allowed[kind]
    if unknown:
        raise InvalidArgument(f"unknown parameters for {kind}: {sorted(unknown)}")
    default_rho = svf.rho if isinstance(svf, MeanVariance) else 1.0
    if kind == "besa_plus":
        return BesaPlus(n_arms, svf)
    if kind == "besa":
        return Besa(n_arms, svf)
    if kind == "ucb1":
        return UCB1(n_arms)
    if kind == "thompson":
        return Thompson(n_arms)
    if kind == "mv_lcb":
        return MVLCB(n_arms, rho=float(params.get("rho", default_rho)))
    if kind == "expexp":
        tau = params.get("tau")
        tau = ExpExp.default_tau(horizon) if tau is None else int(tau)
        return ExpExp(n_arms, rho=float(params.get("rho", default_rho)), tau=tau)
    alpha = params.get("alpha", svf.alpha if isinstance(svf, CVaR) else 0.1)
    return MARAB(n_arms, alpha=float(alpha), C=float(params.get("C", 1.0)))
