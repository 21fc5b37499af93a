import json
from pathlib import Path

import numpy as np
import pytest

from safebandit.config import load_config, parse_config
from safebandit.errors import BanditError, ConfigError
from safebandit.export import SUMMARY_HEADER, TRACE_HEADER, export_results
from safebandit.runner import Experiment, checkpoints, resolve_workers, run_episode, run_experiment

CONFIGS = Path(__file__).parent.parent / "configs"


def cfg(**over):
    base = {
        "environment": {"type": "two_arm", "r": 0.4},
        "value_function": {"type": "mean"},
        "policies": [{"type": "besa_plus"}, {"type": "besa"}],
        "horizon": 50,
        "runs": 3,
        "seed": 5,
    }
    base.update(over)
    return parse_config(base)


def test_first_step_pulls_deterministic_arm():
    tr = run_episode(cfg(horizon=1), 0, 0)
    assert tr.arms.tolist() == [0]
    assert tr.instant_regret[0] == pytest.approx(0.1)


def test_cumulative_regret_identity():
    c = cfg(environment={"type": "arms", "arms": [{"type": "deterministic", "r": 0.9}, {"type": "deterministic", "r": 0.1}]},
            horizon=10, policies=[{"type": "besa"}, {"type": "ucb1"}, {"type": "besa_plus"}])
    for p in range(3):
        tr = run_episode(c, p, 0)
        assert tr.cum_regret[-1] == pytest.approx(0.8 * tr.counts[1])
        assert tr.counts.sum() == 10


def test_trace_invariants_and_determinism():
    c = cfg(horizon=300, environment={"type": "mixture", "k": 5}, value_function={"type": "cvar", "alpha": 0.2},
            policies=[{"type": "besa_plus"}, {"type": "marab"}, {"type": "thompson"}])
    exp = Experiment.prepare(c)
    for p in range(3):
        a, b = exp.run_episode(p, 4), exp.run_episode(p, 4)
        for field in ("arms", "rewards", "cum_regret"):
            assert getattr(a, field).tobytes() == getattr(b, field).tobytes()
        assert np.all(np.diff(a.cum_regret) >= 0)
        assert a.counts.sum() == 300
        subopt = (~exp.optimal_arms[a.arms]).sum()
        assert a.optimal_plays + subopt == 300
        assert np.all((a.rewards >= 0) & (a.rewards <= 1))


def test_pseudo_regret_identity_two_arm():
    c = cfg(horizon=400)
    exp = Experiment.prepare(c)
    gap = exp.gaps.max()
    for run in range(3):
        tr = exp.run_episode(0, run)
        assert set(np.unique(tr.instant_regret)) <= {0.0, gap}
        assert tr.cum_regret[-1] == pytest.approx(gap * tr.counts[0], rel=1e-12)


def test_policies_get_independent_streams():
    c = cfg(policies=[{"type": "besa", "name": "one"}, {"type": "besa", "name": "two"}], horizon=200)
    exp = Experiment.prepare(c)
    assert exp.run_episode(0, 0).rewards.tobytes() != exp.run_episode(1, 0).rewards.tobytes()


def test_single_run_aggregate_equals_trace():
    res = run_experiment(cfg(runs=1), workers=1)
    s = res.summaries["besa_plus"]
    tr = res.traces["besa_plus"][0]
    assert s.mean.tolist() == tr.cum_regret.tolist()
    assert np.all(s.std == 0)
    assert s.p10.tolist() == s.p90.tolist() == tr.cum_regret.tolist()


def test_aggregate_mean_matches_traces():
    res = run_experiment(cfg(runs=4), workers=1)
    for label, s in res.summaries.items():
        stack = np.stack([t.cum_regret for t in res.traces[label]])
        np.testing.assert_allclose(s.mean, stack.mean(axis=0), rtol=0, atol=1e-12)
        opt = np.stack([np.cumsum(t.optimal) / np.arange(1, 51) for t in res.traces[label]])
        np.testing.assert_allclose(s.optimal_play_pct, 100 * opt.mean(axis=0), atol=1e-9)


def test_worker_count_does_not_change_results():
    c = cfg(runs=4, horizon=120)
    one = run_experiment(c, workers=1)
    many = run_experiment(c, workers=3)
    for label in one.summaries:
        assert one.summaries[label].mean.tobytes() == many.summaries[label].mean.tobytes()
        assert one.summaries[label].std.tobytes() == many.summaries[label].std.tobytes()


def test_checkpoints():
    assert checkpoints(5).tolist() == [1, 2, 3, 4, 5]
    assert len(checkpoints(10**4)) == 10**4
    g = checkpoints(10**6)
    assert len(g) <= 1000 and g[0] == 1 and g[-1] == 10**6 and np.all(np.diff(g) > 0)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("BANDIT_THREADS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("BANDIT_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_workers()


def test_export_schema_and_rerun_bytes(tmp_path):
    res = run_experiment(cfg(horizon=3, runs=2), workers=1)
    export_results(res, tmp_path / "a")
    export_results(res, tmp_path / "b")
    a, b = tmp_path / "a", tmp_path / "b"
    lines = (a / "summary.csv").read_text().splitlines()
    assert lines[0] == ",".join(SUMMARY_HEADER) == "policy,t,mean_regret,std_regret,p10,p50,p90,optimal_play_pct"
    assert len(lines) == 1 + 2 * 3
    for f in a.rglob("*"):
        if f.is_file():
            assert f.read_bytes() == (b / f.relative_to(a)).read_bytes()
    trace = (a / "traces" / "besa_plus_0.csv").read_text().splitlines()
    assert trace[0] == ",".join(TRACE_HEADER) and len(trace) == 4
    plot = (a / "plot_regret.csv").read_text().splitlines()
    assert plot[0] == "t,besa_plus,besa"
    assert (a / "true_values.csv").exists() and (a / "config.json").exists()


def test_export_full_traces_on_long_horizon(tmp_path):
    res = run_experiment(cfg(horizon=12_000, runs=1, policies=[{"type": "ucb1"}]), workers=1)
    export_results(res, tmp_path, full_traces=False)
    short = (tmp_path / "traces" / "ucb1_0.csv").read_text().splitlines()
    assert len(short) - 1 == len(res.checkpoints) <= 1000
    export_results(res, tmp_path, full_traces=True)
    assert len((tmp_path / "traces" / "ucb1_0.csv").read_text().splitlines()) == 12_001


def test_export_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = run_experiment(cfg(horizon=3, runs=1), workers=1)
    with pytest.raises(BanditError):
        export_results(res, blocker / "sub")


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(horizon=0)
    with pytest.raises(ConfigError):
        cfg(extra_key=1)
    with pytest.raises(ConfigError):
        cfg(policies=[{"type": "besa"}, {"type": "besa"}])
    with pytest.raises(ConfigError):
        cfg(policies=[{"type": "ucb1", "gamma": 2}])
    with pytest.raises(ConfigError):
        cfg(environment={"type": "two_arm", "r": 0.6})
    with pytest.raises(ConfigError):
        cfg(environment={"type": "arms", "arms": [{"type": "bernoulli", "p": 2}, {"type": "uniform"}]})
    with pytest.raises(ConfigError):
        cfg(value_function={"type": "cvar", "alpha": 0})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    c = load_config(path)
    assert json.loads(path.read_text())["horizon"] == c.horizon


def test_besa_plus_guard_order_in_recorded_traces():
    # whenever arm 1 (b) was chosen, either it was below ln t or arm 0 (a) was not
    exp = Experiment.prepare(cfg(horizon=2000, environment={"type": "two_arm", "r": 0.3}))
    for run in range(5):
        arms = exp.run_episode(0, run).arms
        counts = np.zeros(2, dtype=int)
        for t, a in enumerate(arms.tolist(), start=1):
            if a == 1:
                log_t = np.log(t)
                assert counts[1] < log_t or counts[0] >= log_t
            counts[a] += 1


def test_besa_plus_disjoint_supports_optimal_play():
    T, k = 10_000, 3
    c = cfg(environment={"type": "arms", "arms": [{"type": "uniform", "lo": 0.0, "hi": 0.3},
                                                  {"type": "uniform", "lo": 0.4, "hi": 0.6},
                                                  {"type": "uniform", "lo": 0.7, "hi": 1.0}]},
            policies=[{"type": "besa_plus"}], horizon=T, runs=1)
    tr = Experiment.prepare(c).run_episode(0, 0)
    assert tr.optimal_fraction(T // 2, T) > 1 - 2 * np.log(T) / T * k
