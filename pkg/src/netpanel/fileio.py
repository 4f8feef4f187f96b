"""Delimited-file input and output with deterministic formatting.

Every writer formats floats with 17 significant digits (full double
round-trip precision), orders rows canonically, and replaces the target
file atomically, so identical data always produces byte-identical files.
Readers validate structure eagerly and raise
:class:`~netpanel.errors.DataError` (malformed content) or
:class:`~netpanel.errors.ConfigError` (bad configuration values) rather
than propagating parser internals.
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import ArimaFit
from .errors import ConfigError, DataError
from .graph import StaticNetwork
from .model import FitResult, Forecast
from .nowcast import IndustrySummary, NowcastReport, SparsificationConfig

__all__ = [
    "format_float",
    "read_network",
    "write_network",
    "read_node_series",
    "read_edge_series",
    "write_node_series",
    "write_edge_series",
    "read_actuals",
    "read_sparsify_config",
    "write_sparsify_config",
    "write_fit_report",
    "write_forecast",
    "write_baseline_report",
    "write_replication_coefficients",
    "write_replication_predictions",
    "write_inclusion_distribution",
    "write_inclusion_table",
    "write_nowcast_report",
    "write_industry_errors",
    "write_best_model_table",
    "write_average_table",
    "write_union_inclusion_table",
    "write_error_grid",
    "write_industry_summary",
]


def format_float(x) -> str:
    """17-significant-digit decimal form; empty string for None."""
    if x is None:
        return ""
    return "%.17g" % float(x)


def _atomic_write(path, text: str) -> None:
    """Write the whole file in one rename so readers never see a partial
    file and unchanged content keeps its byte-identical form."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    os.replace(tmp, path)


def _render_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_rows(path, expected_header: Sequence[str]) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, csv.Error) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file, expected header "
                        f"{','.join(expected_header)}")
    if [c.strip() for c in rows[0]] != list(expected_header):
        raise DataError(
            f"{path}: expected header {','.join(expected_header)}, "
            f"got {','.join(rows[0])}"
        )
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    for i, r in enumerate(body, start=2):
        if len(r) != len(expected_header):
            raise DataError(
                f"{path}: row {i} has {len(r)} fields, expected "
                f"{len(expected_header)}"
            )
    return body


def _parse_float(path, row_no: int, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"{path}: row {row_no}: {text!r} is not a number") from exc


# ---------------------------------------------------------------------------
# network files


def read_network(edge_path, node_path) -> StaticNetwork:
    """Network from a node-label file and a directed edge list.

    The node file (``node,label``) fixes node order; the edge file
    (``source,target``) fixes edge order by row position, which is the
    edge labelling used everywhere else.
    """
    node_rows = _read_rows(node_path, ("node", "label"))
    labels = tuple(r[0].strip() for r in node_rows)
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise DataError(f"{node_path}: duplicate node identifiers")
    edges = []
    for i, r in enumerate(_read_rows(edge_path, ("source", "target")), start=2):
        src, dst = r[0].strip(), r[1].strip()
        for lab in (src, dst):
            if lab not in index:
                raise DataError(
                    f"{edge_path}: row {i}: unknown node {lab!r}"
                )
        edges.append((index[src], index[dst]))
    try:
        return StaticNetwork(labels, tuple(edges))
    except ValueError as exc:
        raise DataError(f"{edge_path}: {exc}") from exc


def write_network(edge_path, node_path, net: StaticNetwork) -> None:
    _atomic_write(node_path, _render_csv(
        ("node", "label"), ((lab, lab) for lab in net.node_labels)))
    _atomic_write(edge_path, _render_csv(
        ("source", "target"),
        ((net.node_labels[a], net.node_labels[b]) for a, b in net.edges)))


# ---------------------------------------------------------------------------
# long-format series files


def _read_long(path, key_cols: int, header: Sequence[str],
               keys: dict[tuple, int], what: str):
    """Shared reader for date-keyed long files.

    Returns (values (n_keys, T), time_index).  Dates are ordered by first
    appearance; every (date, key) pair must appear exactly once and every
    date must cover every key.
    """
    rows = _read_rows(path, header)
    dates: list[str] = []
    date_pos: dict[str, int] = {}
    cells: dict[tuple[int, int], float] = {}
    for i, r in enumerate(rows, start=2):
        stamp = r[0].strip()
        key = tuple(c.strip() for c in r[1:1 + key_cols])
        if key not in keys:
            raise DataError(f"{path}: row {i}: unknown {what} {'/'.join(key)!r}")
        if stamp not in date_pos:
            date_pos[stamp] = len(dates)
            dates.append(stamp)
        pos = (keys[key], date_pos[stamp])
        if pos in cells:
            raise DataError(
                f"{path}: row {i}: duplicate entry for {'/'.join(key)} at {stamp}"
            )
        cells[pos] = _parse_float(path, i, r[1 + key_cols])
    T = len(dates)
    values = np.empty((len(keys), T))
    for s in range(len(keys)):
        for t in range(T):
            if (s, t) not in cells:
                missing = [k for k, v in keys.items() if v == s][0]
                raise DataError(
                    f"{path}: no value for {'/'.join(missing)} at {dates[t]}"
                )
            values[s, t] = cells[(s, t)]
    return values, tuple(dates)


def read_node_series(path, net: StaticNetwork):
    """(n_nodes, T) array plus time index from a ``date,node,value`` file."""
    keys = {(lab,): i for i, lab in enumerate(net.node_labels)}
    return _read_long(path, 1, ("date", "node", "value"), keys, "node")


def read_edge_series(path, net: StaticNetwork):
    """(n_edges, T) array plus time index from a
    ``date,source,target,value`` file."""
    keys = {}
    for q, (a, b) in enumerate(net.edges):
        keys[(net.node_labels[a], net.node_labels[b])] = q
    if not keys:
        raise DataError("network has no edges; an edge series file cannot apply")
    return _read_long(path, 2, ("date", "source", "target", "value"),
                      keys, "edge")


def write_node_series(path, net: StaticNetwork, time_index: Sequence[str],
                      values: np.ndarray) -> None:
    rows = (
        (time_index[t], lab, format_float(values[i, t]))
        for t in range(len(time_index))
        for i, lab in enumerate(net.node_labels)
    )
    _atomic_write(path, _render_csv(("date", "node", "value"), rows))


def write_edge_series(path, net: StaticNetwork, time_index: Sequence[str],
                      values: np.ndarray) -> None:
    rows = (
        (time_index[t], net.node_labels[a], net.node_labels[b],
         format_float(values[q, t]))
        for t in range(len(time_index))
        for q, (a, b) in enumerate(net.edges)
    )
    _atomic_write(path, _render_csv(("date", "source", "target", "value"), rows))


def read_actuals(path, net: StaticNetwork) -> np.ndarray:
    """One published value per industry from a ``node,value`` file."""
    rows = _read_rows(path, ("node", "value"))
    index = {lab: i for i, lab in enumerate(net.node_labels)}
    out = np.full(net.n_nodes, np.nan)
    for i, r in enumerate(rows, start=2):
        lab = r[0].strip()
        if lab not in index:
            raise DataError(f"{path}: row {i}: unknown node {lab!r}")
        if not np.isnan(out[index[lab]]):
            raise DataError(f"{path}: row {i}: duplicate node {lab!r}")
        out[index[lab]] = _parse_float(path, i, r[1])
    missing = [lab for lab, i in index.items() if np.isnan(out[i])]
    if missing:
        raise DataError(f"{path}: missing values for {', '.join(missing)}")
    return out


# ---------------------------------------------------------------------------
# flat key-value configuration


def _read_kv(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    out: dict[str, str] = {}
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ConfigError(f"{path}: line {i}: expected key = value")
        key, _, val = text.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}: line {i}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def read_sparsify_config(path) -> SparsificationConfig:
    """Pruning settings from ``key = value`` lines.

    Recognised keys: ``drop_nodes`` (comma-separated labels),
    ``corr_threshold`` (number), ``endpoint_only`` (true/false).
    """
    kv = _read_kv(path)
    known = {"drop_nodes", "corr_threshold", "endpoint_only"}
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")
    drop = tuple(
        s.strip() for s in kv.get("drop_nodes", "").split(",") if s.strip()
    )
    try:
        threshold = float(kv.get("corr_threshold", "0.4"))
    except ValueError as exc:
        raise ConfigError(f"{path}: corr_threshold is not a number") from exc
    endpoint = kv.get("endpoint_only", "false").strip().lower()
    if endpoint not in ("true", "false"):
        raise ConfigError(f"{path}: endpoint_only must be true or false")
    return SparsificationConfig(
        drop_nodes=drop,
        corr_threshold=threshold,
        endpoint_only=endpoint == "true",
    )


def write_sparsify_config(path, cfg: SparsificationConfig) -> None:
    lines = [
        f"drop_nodes = {','.join(cfg.drop_nodes)}",
        f"corr_threshold = {format_float(cfg.corr_threshold)}",
        f"endpoint_only = {'true' if cfg.endpoint_only else 'false'}",
        "",
    ]
    _atomic_write(path, "\n".join(lines))


# ---------------------------------------------------------------------------
# model output files


def write_fit_report(path, fit: FitResult, level: float = 0.95) -> None:
    """One row per coefficient: estimate, standard error, interval."""
    ci = fit.conf_int(level)
    se = fit.std_errors()
    rows = [
        (name, format_float(fit.theta[i]), format_float(se[i]),
         format_float(ci[i, 0]), format_float(ci[i, 1]))
        for i, name in enumerate(fit.coefficient_names)
    ]
    _atomic_write(path, _render_csv(
        ("name", "estimate", "std_error", "ci_lower", "ci_upper"), rows))


def write_forecast(path, fc: Forecast) -> None:
    """Stacked-order rows (edges first), one per series and horizon."""
    net = fc.network
    rows = []
    for q in range(net.n_edges):
        for s in range(fc.horizon):
            rows.append(("edge", net.edge_label(q), str(s + 1),
                         format_float(fc.edge_point[q, s]),
                         format_float(fc.edge_lower[q, s]),
                         format_float(fc.edge_upper[q, s])))
    for i in range(net.n_nodes):
        for s in range(fc.horizon):
            rows.append(("node", net.node_labels[i], str(s + 1),
                         format_float(fc.node_point[i, s]),
                         format_float(fc.node_lower[i, s]),
                         format_float(fc.node_upper[i, s])))
    _atomic_write(path, _render_csv(
        ("series_kind", "series_label", "h", "point", "lower", "upper"), rows))


def write_baseline_report(path, labels: Sequence[str], fits: Sequence[ArimaFit],
                          point: np.ndarray, lower: np.ndarray,
                          upper: np.ndarray) -> None:
    """Per-series ARIMA choices with their one-step forecasts."""
    rows = [
        (labels[i], "arima", str(f.order.p), str(f.order.d), str(f.order.q),
         format_float(f.aic), format_float(point[i]),
         format_float(lower[i]), format_float(upper[i]))
        for i, f in enumerate(fits)
    ]
    _atomic_write(path, _render_csv(
        ("series", "model", "p", "d", "q", "aic", "forecast", "lower", "upper"),
        rows))


def write_replication_coefficients(path, report) -> None:
    """Coefficient recovery table: truth, RMSE, interval coverage."""
    rmse = report.coefficient_rmse()
    coverage = report.coefficient_coverage()
    rows = [
        (name, format_float(report.true_theta[i]), format_float(rmse[i]),
         format_float(coverage[i]))
        for i, name in enumerate(report.coefficient_names)
    ]
    _atomic_write(path, _render_csv(
        ("coefficient", "true_value", "rmse", "coverage"), rows))


def write_replication_predictions(path, report) -> None:
    rows = [
        (r["model"], str(r["rep"]), format_float(r["prediction_rmse_all"]),
         format_float(r["prediction_rmse_nodes"]))
        for r in report.prediction_rows()
    ]
    _atomic_write(path, _render_csv(
        ("model", "rep", "prediction_rmse_all", "prediction_rmse_nodes"), rows))


def write_inclusion_distribution(path, distributions: dict[str, np.ndarray]) -> None:
    """Full union-interval inclusion distribution, one row per
    (graph model, node count)."""
    rows = []
    for model in distributions:
        dist = distributions[model]
        for count, prop in enumerate(dist):
            rows.append((model, str(count), format_float(prop)))
    _atomic_write(path, _render_csv(
        ("graph_model", "n_included", "proportion"), rows))


def write_inclusion_table(path, distributions: dict[str, np.ndarray],
                          counts: Sequence[int] = (17, 18, 19, 20)) -> None:
    """Wide inclusion table: one row per graph model, one column per
    listed inclusion count."""
    header = ["graph_model"] + [f"incl_{c}" for c in counts]
    rows = []
    for model in distributions:
        dist = distributions[model]
        rows.append([model] + [
            format_float(dist[c] if c < len(dist) else 0.0) for c in counts
        ])
    _atomic_write(path, _render_csv(header, rows))


# ---------------------------------------------------------------------------
# nowcast output files


def write_nowcast_report(path, report: NowcastReport) -> None:
    """One row per scored model for a single release."""
    rows = [
        (report.release_id, report.target_month, r.label, r.kind,
         "" if r.max_lag is None else str(r.max_lag),
         "" if r.stage is None else str(r.stage),
         format_float(r.total_point),
         format_float(r.relative_error),
         format_float(r.inclusion))
        for r in report.rows
    ]
    _atomic_write(path, _render_csv(
        ("release", "target_month", "model", "kind", "max_lag", "stage",
         "total_forecast", "relative_error", "interval_inclusion"), rows))


def write_industry_errors(path, report: NowcastReport) -> None:
    """Per-model, per-industry forecasts with bounds and errors."""
    labels = report.network.node_labels
    rows = []
    for r in report.rows:
        for i, lab in enumerate(labels):
            rows.append((
                report.release_id, r.label, lab,
                format_float(r.node_point[i]),
                format_float(r.node_lower[i]),
                format_float(r.node_upper[i]),
                format_float(None if r.node_relative_errors is None
                             else r.node_relative_errors[i]),
            ))
    _atomic_write(path, _render_csv(
        ("release", "model", "industry", "forecast", "lower", "upper",
         "relative_error"), rows))


def _scored_network_rows(report: NowcastReport):
    rows = [r for r in report.rows if r.kind == "network"]
    if not rows or any(r.relative_error is None for r in rows):
        raise DataError(
            f"release {report.release_id!r} has unscored model rows; "
            f"actuals are required for summary tables"
        )
    return rows


def write_best_model_table(path, reports: Sequence[NowcastReport]) -> None:
    """Best network model (by lag and stage) per release next to the baselines."""
    rows = []
    for rep in reports:
        net_rows = _scored_network_rows(rep)
        best = min(net_rows, key=lambda r: (r.relative_error, r.max_lag, r.stage))
        rows.append((
            rep.release_id,
            str(best.max_lag), str(best.stage),
            format_float(best.relative_error),
            format_float(rep.row("arima_auto").relative_error),
            format_float(rep.row("arima_random_walk").relative_error),
        ))
    _atomic_write(path, _render_csv(
        ("release", "best_lag", "best_stage", "network_error",
         "arima_auto_error", "arima_random_walk_error"), rows))


def write_average_table(path, reports: Sequence[NowcastReport]) -> None:
    """Model-average error per release next to the baselines."""
    rows = []
    for rep in reports:
        rows.append((
            rep.release_id,
            format_float(rep.row("average").relative_error),
            format_float(rep.row("arima_auto").relative_error),
            format_float(rep.row("arima_random_walk").relative_error),
        ))
    _atomic_write(path, _render_csv(
        ("release", "average_error", "arima_auto_error",
         "arima_random_walk_error"), rows))


def write_union_inclusion_table(path, reports: Sequence[NowcastReport]) -> None:
    """Share of industries inside the union interval, per release."""
    rows = [
        (rep.release_id, format_float(rep.row("average").inclusion))
        for rep in reports
    ]
    _atomic_write(path, _render_csv(("release", "union_inclusion"), rows))


def write_error_grid(path, report: NowcastReport, lags: Sequence[int],
                     stages: Sequence[int], field: str = "relative_error") -> None:
    """Lag-by-stage grid of one scored quantity for a single release."""
    if field not in ("relative_error", "interval_inclusion"):
        raise ConfigError(f"unknown grid field {field!r}")
    attr = "relative_error" if field == "relative_error" else "inclusion"
    header = ["lag"] + [f"stage_{s}" for s in stages]
    rows = []
    for l in lags:
        row = [str(l)]
        for s in stages:
            row.append(format_float(getattr(report.row(f"net_lag{l}_stage{s}"), attr)))
        rows.append(row)
    _atomic_write(path, _render_csv(header, rows))


def write_industry_summary(path, summary: IndustrySummary) -> None:
    rows = [
        (lab, format_float(summary.mean_error[i]), format_float(summary.sd_error[i]))
        for i, lab in enumerate(summary.industries)
    ]
    _atomic_write(path, _render_csv(
        ("industry", "mean_error", "sd_error"), rows))
