import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safebandit.concentration import (
    BoundParams,
    beta_series,
    c_delta_gamma,
    mcdiarmid_deviation,
    mcdiarmid_tail,
    regret_bound_curve,
    subsample_deviation,
    subsample_tail,
    suboptimal_play_threshold,
    verify_bound_monte_carlo,
    violation_rates,
    violation_threshold,
)
from safebandit.environments import Bernoulli, Uniform
from safebandit.errors import InvalidArgument
from safebandit.rng import derive_run_rng
from safebandit.safety import CVaR, Mean, MeanVariance


def test_mcdiarmid_tail_examples():
    assert mcdiarmid_tail(100, 0.01, 0.1) == pytest.approx(math.exp(-2), rel=1e-12)
    assert mcdiarmid_tail(1, 1, 1) == pytest.approx(0.1353352832366127)
    assert mcdiarmid_tail(10, 0.1, 0) == 1.0


def test_mcdiarmid_deviation_examples():
    assert mcdiarmid_deviation(50, 1, 0.05) == pytest.approx(math.sqrt(math.log(20) / 100))
    assert mcdiarmid_deviation(50, 1, 1 - 1e-12) < 1e-5


@settings(max_examples=200)
@given(st.integers(1, 10_000), st.floats(0.1, 10), st.floats(1e-6, 0.999))
def test_deviation_inverts_tail(n, gamma, delta):
    eps = mcdiarmid_deviation(n, gamma, delta)
    assert mcdiarmid_tail(n, gamma / n, eps) == pytest.approx(delta, rel=1e-9)


@settings(max_examples=200)
@given(st.integers(2, 5000), st.data(), st.floats(0.1, 10), st.floats(1e-6, 0.999))
def test_subsample_deviation_inverts_tail(n, data, gamma, delta):
    m = data.draw(st.integers(1, n - 1))
    eps = subsample_deviation(m, n, gamma, delta)
    assert subsample_tail(m, n, gamma / m, eps) == pytest.approx(delta, rel=1e-9)


def test_subsample_tail_examples():
    assert subsample_tail(10, 10, 0.1, 0.1) == 0.0
    assert subsample_tail(5, 100, 0.2, 0.2) == pytest.approx(math.exp(-0.4))


@pytest.mark.parametrize("args", [(0, 1, 0.1), (5, 0, 0.1), (5, 1, -0.1)])
def test_tail_argument_checks(args):
    with pytest.raises(InvalidArgument):
        mcdiarmid_tail(*args)


def test_subsample_argument_checks():
    with pytest.raises(InvalidArgument):
        subsample_tail(11, 10, 0.1, 0.1)
    with pytest.raises(InvalidArgument):
        subsample_deviation(0, 10, 1, 0.1)


def test_bound_params():
    p = BoundParams(0.5, 1.0)
    assert p.omega == pytest.approx(0.0625)
    assert p.m == pytest.approx(64)
    assert p.kappa == pytest.approx(0.0625 / 64)
    assert p.C == pytest.approx(math.exp(0.0625) / (1 - math.exp(-0.1875)))
    for d in (0.01, 0.3, 1.0):
        for g in (1.0, 2.0, 10.0):
            q = BoundParams(d, g)
            assert all(0 < v < math.inf for v in (q.omega, q.m, q.kappa, q.C))
    with pytest.raises(InvalidArgument):
        BoundParams(0, 1)
    with pytest.raises(InvalidArgument):
        BoundParams(0.5, -1)


def test_suboptimal_play_threshold_examples():
    assert suboptimal_play_threshold(BoundParams(0.5, 1.0), math.e) == pytest.approx(64)
    assert suboptimal_play_threshold(BoundParams(0.1, 1.5), math.e) == pytest.approx(3600)
    with pytest.raises(InvalidArgument):
        suboptimal_play_threshold(BoundParams(0.5, 1.0), 1)


def test_beta_single_term():
    p = BoundParams(0.5, 1.0)
    t = 10
    by_hand = p.C * math.exp(-p.kappa * t / math.log(t)) * (1 - math.exp(-t * p.omega))
    assert beta_series(p, 10, 10) == pytest.approx(by_hand, rel=1e-12)


def test_beta_matches_python_loop_and_is_monotone():
    p = BoundParams(0.3, 1.2)
    loop = math.fsum(p.C * math.exp(-p.kappa * t / math.log(t)) * (1 - math.exp(-t * p.omega)) for t in range(2, 3001))
    assert beta_series(p, 2, 3000) == pytest.approx(loop, rel=1e-10)
    vals = [beta_series(p, 2, T) for T in (10, 100, 1000, 3000)]
    assert all(b >= 0 for b in vals) and vals == sorted(vals)
    with pytest.raises(InvalidArgument):
        beta_series(p, 1, 10)
    with pytest.raises(InvalidArgument):
        beta_series(p, 20, 10)


def test_beta_over_log_values():
    # the ratio keeps growing at these horizons; recorded here so the numbers are pinned
    p = BoundParams(0.5, 1.0)
    ratios = [beta_series(p, 2, T) / math.log(T) for T in (10**3, 10**4, 10**5)]
    assert ratios == pytest.approx([821.4, 4015.6, 5312.9], rel=1e-3)


def test_c_delta_gamma():
    p = BoundParams(0.5, 1.0)
    T = 1000
    expected = max(math.log(T) / p.kappa, math.exp(4 * math.log(2) / 0.25), 3 * 64 * math.log(T))
    assert c_delta_gamma(p, T) == pytest.approx(expected)
    assert c_delta_gamma(BoundParams(0.01, 1.0), T) == math.inf


def test_regret_bound_curve_properties():
    p = BoundParams(0.5, 1.0)
    grid = [3, 10, 100, 1000, 10**4]
    curve = regret_bound_curve(p, grid)
    assert curve == sorted(curve)
    c4, c2 = regret_bound_curve(p, [10**4, 10**2])
    assert c4 / c2 < (math.log(10**4) / math.log(10**2)) * 10
    smaller_gap = regret_bound_curve(BoundParams(0.25, 1.0), grid)
    assert all(a > b for a, b in zip(smaller_gap, curve))
    capped = regret_bound_curve(p, grid, cap=True)
    assert all(c == min(v, 0.5 * T) for c, v, T in zip(capped, curve, grid))
    with pytest.raises(InvalidArgument):
        regret_bound_curve(p, [2])


def test_violation_threshold():
    assert violation_threshold(0.05, 20000) == pytest.approx(0.05 + 3 * math.sqrt(0.05 * 0.95 / 20000))
    assert violation_threshold(0.05, 20000) - 0.05 == pytest.approx(0.0046, abs=1e-4)


def test_iid_mean_bernoulli():
    rate = verify_bound_monte_carlo("iid", Mean(), Bernoulli(0.5), 100, None, 0.05, 20000, derive_run_rng(0, 0))
    assert rate <= violation_threshold(0.05, 20000)


def test_iid_mean_variance_uniform():
    rate = verify_bound_monte_carlo("iid", MeanVariance(1.0), Uniform(), 50, None, 0.1, 20000, derive_run_rng(0, 1))
    assert rate <= violation_threshold(0.1, 20000)


def test_subsample_full_set_never_violates():
    for svf in (Mean(), MeanVariance(1.0), CVaR(0.2)):
        assert verify_bound_monte_carlo("subsample", svf, Uniform(), 20, 20, 0.1, 2000, derive_run_rng(0, 2)) == 0.0


def test_subsample_cvar_within_bound():
    rate = verify_bound_monte_carlo("subsample", CVaR(0.2), Uniform(), 50, 25, 0.1, 5000, derive_run_rng(0, 3))
    assert rate <= violation_threshold(0.1, 5000)


def test_rates_share_trials_and_are_monotone_in_delta():
    rates = violation_rates("iid", Mean(), Bernoulli(0.5), 30, None, [0.01, 0.05, 0.2], 5000, derive_run_rng(0, 4))
    assert rates == sorted(rates)


def test_verifier_argument_checks():
    rng = derive_run_rng(0, 5)
    with pytest.raises(InvalidArgument):
        verify_bound_monte_carlo("iid", Mean(), Uniform(), 10, None, 0.1, 999, rng)
    with pytest.raises(InvalidArgument):
        verify_bound_monte_carlo("subsample", Mean(), Uniform(), 10, 11, 0.1, 1000, rng)
    with pytest.raises(InvalidArgument):
        verify_bound_monte_carlo("subsample", Mean(), Uniform(), 10, None, 0.1, 1000, rng)
    with pytest.raises(InvalidArgument):
        verify_bound_monte_carlo("bootstrap", Mean(), Uniform(), 10, 5, 0.1, 1000, rng)


def test_verifier_is_deterministic():
    a = verify_bound_monte_carlo("subsample", Mean(), Uniform(), 40, 20, 0.1, 3000, derive_run_rng(9, 9))
    b = verify_bound_monte_carlo("subsample", Mean(), Uniform(), 40, 20, 0.1, 3000, derive_run_rng(9, 9))
    assert a == b
