"""Command-line interface.

One executable, seven subcommands: simulation replication studies,
single-panel simulation and graph generation, fitting and forecasting
from delimited files, single-release nowcasting, and the multi-release
evaluation that produces the summary tables.  Report-producing commands
render their figures next to the delimited output.

Exit codes: 0 success; 2 bad input or configuration (including malformed
files); 3 numeric failure (non-stationarity, non-convergence); 4 rank
deficiency, with the offending design columns named on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio, figures
from .errors import (
    ConfigError,
    DataError,
    NumericError,
    SingularityError,
    StationarityError,
)
from .model import ModelOrder, PanelSeries, fit, forecast
from .nowcast import (
    ReleaseDataset,
    SparsificationConfig,
    append_average_row,
    industry_summary,
    model_average_release,
    nowcast_release,
    sparsify,
)
from .simulate import (
    GraphModel,
    generate_graph,
    model_average_experiment,
    replicate_experiment,
    simulate_panel,
    standard_regime,
)

_GRAPH_KINDS = ("er", "sbm", "rdp")


def _graph_model(kind: str, nodes: int, density: float) -> GraphModel:
    if kind == "er":
        return GraphModel.erdos_renyi(nodes, density)
    if kind == "sbm":
        return GraphModel.stochastic_block(nodes, density)
    if kind == "rdp":
        return GraphModel.random_dot_product(nodes, density)
    raise ConfigError(f"unknown graph kind {kind!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")
    return values


def _stages_for(lags: int, text: str) -> tuple[int, ...]:
    stages = _int_list(text)
    if len(stages) == 1:
        stages = stages * lags
    if len(stages) != lags:
        raise ConfigError(
            f"--stages needs 1 or {lags} entries for --lags {lags}, "
            f"got {len(stages)}"
        )
    return stages


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_panel(args) -> PanelSeries:
    net = fileio.read_network(args.network_edges, args.network_nodes)
    node_values, node_dates = fileio.read_node_series(args.node_series, net)
    if net.n_edges:
        if not args.edge_series:
            raise DataError(
                "--edge-series is required when the network has edges"
            )
        edge_values, edge_dates = fileio.read_edge_series(args.edge_series, net)
        if edge_dates != node_dates:
            raise DataError("node and edge series files disagree on dates")
    else:
        edge_values = np.zeros((0, node_values.shape[1]))
    return PanelSeries(net, node_values, edge_values, node_dates)


# ---------------------------------------------------------------------------
# subcommands


def _regime_from_args(args):
    model = _graph_model(args.graph, args.nodes, args.density)
    return standard_regime(args.regime, model, n_times=args.times,
                           burn_in=args.burn_in, noise_sd=args.noise_sd)


def cmd_replicate_sim(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    out = _out_dir(args)
    regime = _regime_from_args(args)
    report = replicate_experiment(
        regime, args.reps, args.seed, level=args.level,
        include_baselines=not args.no_baselines, jobs=args.jobs,
    )
    fileio.write_replication_coefficients(out / "coefficients.csv", report)
    fileio.write_replication_predictions(out / "predictions.csv", report)
    figures.prediction_rmse_boxplot(out / "prediction_rmse.png", report)
    if report.failures:
        log = "\n".join(f"rep {i}: {msg}" for i, msg in report.failures) + "\n"
        (out / "failures.log").write_text(log, encoding="utf-8")
        print(f"{len(report.failures)} replication(s) failed; see failures.log",
              file=sys.stderr)
    print(f"wrote {out / 'coefficients.csv'} and {out / 'predictions.csv'} "
          f"({report.n_successful} successful replications)")
    return 0


def cmd_ma_sim(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    out = _out_dir(args)
    regime = _regime_from_args(args)
    report = model_average_experiment(
        regime, args.reps, args.seed, lags=_int_list(args.lags),
        stage=args.stage, level=args.level, jobs=args.jobs,
    )
    dist = {args.graph: report.inclusion_proportions()}
    fileio.write_inclusion_distribution(out / "inclusion_distribution.csv", dist)
    fileio.write_inclusion_table(out / "inclusion_table.csv", dist)
    print(f"wrote {out / 'inclusion_distribution.csv'} "
          f"({report.n_successful} successful replications)")
    return 0


def cmd_gen_graph(args) -> int:
    out = _out_dir(args)
    model = _graph_model(args.graph, args.nodes, args.density)
    net = generate_graph(model, args.seed)
    fileio.write_network(out / "network_edges.csv", out / "network_nodes.csv", net)
    print(f"wrote network with {net.n_nodes} nodes, {net.n_edges} edges to {out}")
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    regime = _regime_from_args(args)
    rng_children = np.random.SeedSequence(args.seed).spawn(2)
    net = generate_graph(regime.graph_model, rng_children[0])
    panel = simulate_panel(net, regime, rng_children[1],
                           literal_nested=args.literal_nested_form)
    fileio.write_network(out / "network_edges.csv", out / "network_nodes.csv", net)
    fileio.write_node_series(out / "node_series.csv", net, panel.time_index,
                             panel.node_values)
    fileio.write_edge_series(out / "edge_series.csv", net, panel.time_index,
                             panel.edge_values)
    print(f"wrote simulated panel ({net.n_nodes} nodes, {net.n_edges} edges, "
          f"{panel.n_times} time points) to {out}")
    return 0


def cmd_fit(args) -> int:
    out = _out_dir(args)
    panel = _read_panel(args)
    order = ModelOrder(args.lags, _stages_for(args.lags, args.stages))
    result = fit(panel, order)
    fileio.write_fit_report(out / "fit_report.csv", result, level=args.level)
    print(f"wrote {out / 'fit_report.csv'} ({order.n_params} coefficients, "
          f"residual variance {result.residual_variance:.6g})")
    return 0


def cmd_forecast(args) -> int:
    out = _out_dir(args)
    panel = _read_panel(args)
    order = ModelOrder(args.lags, _stages_for(args.lags, args.stages))
    result = fit(panel, order)
    fc = forecast(result, args.horizon, level=args.level)
    fileio.write_fit_report(out / "fit_report.csv", result, level=args.level)
    fileio.write_forecast(out / "forecast.csv", fc)
    print(f"wrote {out / 'forecast.csv'} ({args.horizon} step(s) ahead)")
    return 0


def _load_release(release_dir: Path) -> ReleaseDataset:
    release_dir = Path(release_dir)
    if not release_dir.is_dir():
        raise DataError(f"release directory not found: {release_dir}")
    net = fileio.read_network(release_dir / "network_edges.csv",
                              release_dir / "network_nodes.csv")
    node_levels, dates = fileio.read_node_series(
        release_dir / "node_levels.csv", net)
    if net.n_edges:
        edge_levels, edge_dates = fileio.read_edge_series(
            release_dir / "edge_levels.csv", net)
        if edge_dates != dates:
            raise DataError(f"{release_dir}: node and edge files disagree on dates")
    else:
        edge_levels = np.zeros((0, node_levels.shape[1]))
    return ReleaseDataset(release_dir.name, net, node_levels, edge_levels, dates)


def _sparsify_config(args) -> SparsificationConfig:
    if args.config is not None:
        cfg = fileio.read_sparsify_config(args.config)
    else:
        cfg = SparsificationConfig()
    if args.corr_threshold is not None or args.endpoint_corr:
        cfg = SparsificationConfig(
            drop_nodes=cfg.drop_nodes,
            corr_threshold=(args.corr_threshold if args.corr_threshold is not None
                            else cfg.corr_threshold),
            endpoint_only=args.endpoint_corr or cfg.endpoint_only,
        )
    return cfg


def cmd_nowcast(args) -> int:
    out = _out_dir(args)
    release = _load_release(args.release)
    cfg = _sparsify_config(args)
    method = "stl" if args.stl else "moving_average"
    lags = _int_list(args.lags)
    # actuals must match the post-pruning industry set
    pruned_net = sparsify(release, cfg).network
    actuals = None
    if getattr(args, "actuals", None):
        actuals = fileio.read_actuals(args.actuals, pruned_net)
    else:
        default = Path(args.release) / "actuals.csv"
        if default.exists():
            actuals = fileio.read_actuals(default, pruned_net)
    if args.ma:
        report = model_average_release(
            release, cfg, next_actuals=actuals, lags=lags, stage=args.stage,
            level=args.level, include_baselines=True, method=method,
        )
    else:
        stages = _int_list(args.stages)
        orders = [ModelOrder.uniform(l, s) for l in lags for s in stages]
        report = nowcast_release(
            release, cfg, orders, next_actuals=actuals, level=args.level,
            include_baselines=True, method=method,
        )
    fileio.write_nowcast_report(out / "nowcast_report.csv", report)
    fileio.write_industry_errors(out / "industry_errors.csv", report)
    scored = report.actual_total is not None
    if not args.ma:
        stages = _int_list(args.stages)
        if scored:
            fileio.write_error_grid(out / "error_grid.csv", report, lags, stages)
            fileio.write_error_grid(out / "inclusion_grid.csv", report, lags,
                                    stages, field="interval_inclusion")
            figures.error_by_lag_plot(out / "error_by_lag.png", report, lags, stages)
    print(f"wrote {out / 'nowcast_report.csv'} "
          f"(target month {report.target_month}, "
          f"{'scored' if scored else 'unscored'})")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    root = Path(args.releases)
    if not root.is_dir():
        raise DataError(f"releases directory not found: {root}")
    release_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not release_dirs:
        raise DataError(f"no release subdirectories under {root}")
    cfg = _sparsify_config(args)
    method = "stl" if args.stl else "moving_average"
    lags = _int_list(args.lags)
    stages = _int_list(args.stages)
    if 1 not in stages:
        raise ConfigError("--stages must include stage 1 for the model average")
    orders = [ModelOrder.uniform(l, s) for l in lags for s in stages]
    reports = []
    for rdir in release_dirs:
        release = _load_release(rdir)
        pruned_net = sparsify(release, cfg).network
        actuals = fileio.read_actuals(rdir / "actuals.csv", pruned_net)
        report = nowcast_release(
            release, cfg, orders, next_actuals=actuals, level=args.level,
            include_baselines=True, method=method,
        )
        report = append_average_row(report, next_actuals=actuals, lags=lags,
                                    stage=1)
        reports.append(report)
        per_dir = out / release.release_id
        per_dir.mkdir(parents=True, exist_ok=True)
        fileio.write_nowcast_report(per_dir / "nowcast_report.csv", report)
        fileio.write_industry_errors(per_dir / "industry_errors.csv", report)
        fileio.write_error_grid(per_dir / "error_grid.csv", report, lags, stages)
        fileio.write_error_grid(per_dir / "inclusion_grid.csv", report, lags,
                                stages, field="interval_inclusion")
        figures.error_by_lag_plot(per_dir / "error_by_lag.png", report, lags,
                                  stages)
    fileio.write_best_model_table(out / "best_model_by_release.csv", reports)
    fileio.write_average_table(out / "model_average_by_release.csv", reports)
    fileio.write_union_inclusion_table(out / "union_inclusion_by_release.csv",
                                       reports)
    summary = industry_summary(reports, model_label="average")
    fileio.write_industry_summary(out / "industry_summary.csv", summary)
    figures.release_error_lines(
        out / "release_errors.png", reports,
        ("average", "arima_auto", "arima_random_walk"))
    figures.industry_error_bars(out / "industry_errors.png", summary)
    print(f"wrote summary tables for {len(reports)} release(s) to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_graph_args(p):
    p.add_argument("--graph", choices=_GRAPH_KINDS, required=True,
                   help="random-graph family")
    p.add_argument("--nodes", type=int, default=20, help="number of nodes")
    p.add_argument("--density", type=float, default=0.4,
                   help="expected edge density")


def _add_panel_args(p):
    p.add_argument("--network-edges", required=True, help="source,target CSV")
    p.add_argument("--network-nodes", required=True, help="node,label CSV")
    p.add_argument("--node-series", required=True, help="date,node,value CSV")
    p.add_argument("--edge-series", help="date,source,target,value CSV")
    p.add_argument("--lags", type=int, default=1, help="autoregressive order")
    p.add_argument("--stages", default="1",
                   help="neighbourhood stage per lag (single value or "
                        "comma list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netpanel",
        description="Network time-series modelling, simulation and nowcasting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def _add_regime_args(p):
        p.add_argument("--regime", type=int, choices=(1, 2, 3), required=True)
        _add_graph_args(p)
        p.add_argument("--times", type=int, default=200)
        p.add_argument("--burn-in", type=int, default=50)
        p.add_argument("--noise-sd", type=float, default=0.1)

    p = sub.add_parser("replicate-sim",
                       help="replication study of coefficient recovery and "
                            "one-step prediction")
    _add_regime_args(p)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--no-baselines", action="store_true",
                   help="skip the per-series ARIMA comparisons")
    p.set_defaults(func=cmd_replicate_sim)

    p = sub.add_parser("ma-sim",
                       help="union-interval inclusion study for the "
                            "lag-ladder model average")
    _add_regime_args(p)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--lags", default="1,2,3,4,5,6,7,8,9",
                   help="comma-separated lag ladder")
    p.add_argument("--stage", type=int, default=1)
    p.set_defaults(func=cmd_ma_sim)

    p = sub.add_parser("gen-graph", help="draw one random network")
    _add_graph_args(p)
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("simulate", help="draw one network and one panel")
    _add_regime_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate coefficients from panel files")
    _add_panel_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="fit and forecast from panel files")
    _add_panel_args(p)
    p.add_argument("--horizon", type=int, default=1)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("nowcast", help="nowcast one release directory")
    p.add_argument("--release", required=True,
                   help="directory with network and level CSVs")
    p.add_argument("--config", help="sparsification key-value file")
    p.add_argument("--actuals", help="node,value CSV of published values")
    p.add_argument("--lags", default="1,2,3,4,5,6,7,8,9")
    p.add_argument("--stages", default="0,1,2,3")
    p.add_argument("--stage", type=int, default=1,
                   help="neighbourhood stage for --ma")
    p.add_argument("--ma", action="store_true",
                   help="average the lag ladder instead of scoring a grid")
    p.set_defaults(func=cmd_nowcast)

    p = sub.add_parser("eval",
                       help="score every release and write the summary tables")
    p.add_argument("--releases", required=True,
                   help="directory of release subdirectories")
    p.add_argument("--config", help="sparsification key-value file")
    p.add_argument("--lags", default="1,2,3,4,5,6,7,8,9")
    p.add_argument("--stages", default="0,1,2,3")
    p.set_defaults(func=cmd_eval)

    for name, sp in sub.choices.items():
        sp.add_argument("--seed", type=int, default=0,
                        help="master random seed (default 0)")
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel worker processes")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--level", type=float, default=0.95,
                        help="interval coverage level")
        sp.add_argument("--literal-nested-form", action="store_true",
                        help="use the nested product form of the "
                             "node-equation edge terms")
        sp.add_argument("--corr-threshold", type=float,
                        help="override the sparsification threshold")
        sp.add_argument("--endpoint-corr", action="store_true",
                        help="screen edges against endpoint industries only")
        sp.add_argument("--stl", action="store_true",
                        help="loess-based seasonal decomposition")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (StationarityError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
