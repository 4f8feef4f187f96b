"""Figure rendering for the report-producing commands.

Every plot lands in a file next to the delimited output it illustrates.
The Agg backend is forced so rendering works headless, and figure sizes
and DPI are fixed so reruns produce the same images.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .nowcast import IndustrySummary, NowcastReport

_DPI = 150


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def prediction_rmse_boxplot(path, report) -> Path:
    """Distribution of one-step prediction errors per model over the
    replications, for all series and for the nodal series alone."""
    by_model_all = defaultdict(list)
    by_model_nodes = defaultdict(list)
    for row in report.prediction_rows():
        by_model_all[row["model"]].append(row["prediction_rmse_all"])
        by_model_nodes[row["model"]].append(row["prediction_rmse_nodes"])
    models = sorted(by_model_all)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, data, title in (
        (axes[0], by_model_all, "all series"),
        (axes[1], by_model_nodes, "node series"),
    ):
        ax.boxplot([data[m] for m in models], tick_labels=models)
        ax.set_title(title)
        ax.set_xlabel("model")
        ax.tick_params(axis="x", rotation=20)
    axes[0].set_ylabel("one-step prediction RMSE")
    fig.suptitle(f"{report.regime_name} on {report.graph_kind} graphs "
                 f"({report.n_successful} replications)")
    return _save(fig, path)


def error_by_lag_plot(path, report: NowcastReport, lags: Sequence[int],
                      stages: Sequence[int]) -> Path:
    """Relative error of the total against lag, one line per stage."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for s in stages:
        errs = [report.row(f"net_lag{l}_stage{s}").relative_error for l in lags]
        ax.plot(list(lags), errs, marker="o", label=f"stage {s}")
    ax.set_xlabel("lag order")
    ax.set_ylabel("relative error of total")
    ax.set_title(f"release {report.release_id} (target {report.target_month})")
    ax.legend()
    return _save(fig, path)


def release_error_lines(path, reports: Sequence[NowcastReport],
                        labels: Sequence[str]) -> Path:
    """Relative error per release for a set of scored models."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ids = [r.release_id for r in reports]
    x = range(len(ids))
    for label in labels:
        ax.plot(x, [r.row(label).relative_error for r in reports],
                marker="o", label=label)
    ax.set_xticks(list(x))
    ax.set_xticklabels(ids, rotation=30, ha="right")
    ax.set_ylabel("relative error of total")
    ax.legend()
    return _save(fig, path)


def industry_error_bars(path, summary: IndustrySummary, top_k: int = 10) -> Path:
    """Mean relative error per industry with a one-sd whisker, largest
    first, truncated to the ``top_k`` worst."""
    order = sorted(range(len(summary.industries)),
                   key=lambda i: -summary.mean_error[i])[:top_k]
    labels = [summary.industries[i] for i in order]
    means = [summary.mean_error[i] for i in order]
    sds = [summary.sd_error[i] for i in order]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(order)), means, yerr=sds, capsize=3)
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("mean relative error")
    ax.set_title(f"model {summary.model_label!r} across releases")
    return _save(fig, path)
