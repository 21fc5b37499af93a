"""CSV (and optional PNG) output for aggregated results.

Floats are written with ``repr`` so re-exporting the same result is
byte-identical and values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .concentration import BoundParams, regret_bound_curve
from .errors import BanditError
from .runner import AggregateResult

SUMMARY_HEADER = ["policy", "t", "mean_regret", "std_regret", "p10", "p50", "p90", "optimal_play_pct"]
TRACE_HEADER = ["t", "arm", "reward", "cum_regret"]


def _f(x) -> str:
    return repr(float(x))


def _writer(path: Path):
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def export_results(result: AggregateResult, directory, *, full_traces: bool | None = None, plot: bool = False) -> list[Path]:
    """Write ``summary.csv``, per-run traces, plot data files and ``true_values.csv``.

    Returns the written paths. Traces hold the summary checkpoints unless
    ``full_traces`` (default: the config's ``full_traces``) asks for every step.
    """
    out = Path(directory)
    full = result.config.full_traces if full_traces is None else full_traces
    try:
        (out / "traces").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise BanditError(f"cannot create output directory {out}: {exc.strerror}") from None
    written = []
    grid = result.checkpoints

    path = out / "summary.csv"
    fh, w = _writer(path)
    with fh:
        w.writerow(SUMMARY_HEADER)
        for label, s in result.summaries.items():
            for i, t in enumerate(grid):
                w.writerow([label, int(t), _f(s.mean[i]), _f(s.std[i]), _f(s.p10[i]), _f(s.p50[i]), _f(s.p90[i]), _f(s.optimal_play_pct[i])])
    written.append(path)

    for label, traces in result.traces.items():
        for tr in traces:
            steps = np.arange(1, tr.horizon + 1) if full else grid
            path = out / "traces" / f"{label}_{tr.run_id}.csv"
            fh, w = _writer(path)
            with fh:
                w.writerow(TRACE_HEADER)
                w.writerows(
                    [int(t), int(tr.arms[t - 1]), _f(tr.rewards[t - 1]), _f(tr.cum_regret[t - 1])] for t in steps
                )
            written.append(path)

    labels = list(result.summaries)
    for name, attr in (("plot_regret.csv", "mean"), ("plot_optimal_play.csv", "optimal_play_pct")):
        path = out / name
        fh, w = _writer(path)
        with fh:
            w.writerow(["t", *labels])
            for i, t in enumerate(grid):
                w.writerow([int(t), *(_f(getattr(result.summaries[lab], attr)[i]) for lab in labels)])
        written.append(path)

    bound = _bound_overlay(result)
    if bound is not None:
        path = out / "plot_bound.csv"
        fh, w = _writer(path)
        with fh:
            w.writerow(["t", "regret_bound"])
            w.writerows([int(t), _f(b)] for t, b in bound)
        written.append(path)

    path = out / "true_values.csv"
    fh, w = _writer(path)
    env_labels = result.environment_labels or tuple(f"arm{i}" for i in range(len(result.true_values)))
    with fh:
        w.writerow(["arm", "label", "value", "method", "ci_halfwidth"])
        for i, tv in enumerate(result.true_values):
            w.writerow([i, env_labels[i], _f(tv.value), tv.method, _f(tv.ci_halfwidth)])
    written.append(path)

    path = out / "config.json"
    path.write_text(json.dumps(result.config.model_dump(), indent=2, sort_keys=True) + "\n")
    written.append(path)

    if plot:
        written.extend(_plot(result, out, bound))
    return written


def _bound_overlay(result: AggregateResult):
    """Capped two-arm regret bound at the checkpoints, or None when it does not apply."""
    values = [tv.value for tv in result.true_values]
    if len(values) != 2:
        return None
    gap = abs(values[0] - values[1])
    if gap <= 0:
        return None
    svf = result.config.value_function.build()
    params = BoundParams(gap, svf.gamma, result.config.horizon)
    grid = [int(t) for t in result.checkpoints if t >= 3]
    if len(grid) > 200:
        grid = sorted(set(np.round(np.geomspace(3, grid[-1], 200)).astype(int).tolist()))
    curve = regret_bound_curve(params, grid, cap=True)
    return [(t, b) for t, b in zip(grid, curve) if math.isfinite(b)]


def _plot(result: AggregateResult, out: Path, bound) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    for name, attr, ylabel in (("regret.png", "mean", "cumulative regret"), ("optimal_play.png", "optimal_play_pct", "optimal arm play (%)")):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for label, s in result.summaries.items():
            ax.plot(s.checkpoints, getattr(s, attr), label=label)
            if attr == "mean" and len(s.checkpoints) > 1:
                ax.fill_between(s.checkpoints, s.p10, s.p90, alpha=0.15)
        if attr == "mean" and bound:
            ax.plot([t for t, _ in bound], [b for _, b in bound], "k--", lw=0.8, label="regret bound")
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        path = out / name
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
