"""Release-by-release nowcasting of industry aggregates.

A release is one vintage of a monthly panel: value-added levels per
industry on the nodes and payment amounts on the edges of a fixed
directed network.  The pipeline turns levels into month-on-month growth
rates, prunes the network to curb multicollinearity, strips seasonality,
fits the network autoregression on what remains, and maps the one-step
forecast back to the level scale, where it is scored against the next
month's published values.  Per-series ARIMA models fitted on the raw
level series provide the comparison baselines.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .baselines import auto_arima_batch, batch_forecast, rw_drift_fit
from .errors import ConfigError, DataError
from .graph import StaticNetwork
from .model import ModelOrder, PanelSeries, fit, forecast

__all__ = [
    "ReleaseDataset",
    "SparsificationConfig",
    "SparsificationDetail",
    "SeasonalDecomposition",
    "ModelScore",
    "NowcastReport",
    "IndustrySummary",
    "to_growth",
    "edge_growth",
    "sparsify",
    "sparsify_detail",
    "deseasonalize",
    "nowcast_release",
    "model_average_release",
    "append_average_row",
    "industry_summary",
]

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_MIN_MONTHS = 26


def _month_ordinal(stamp: str) -> int:
    m = _MONTH_RE.match(stamp)
    if m is None:
        raise DataError(f"time stamp {stamp!r} is not in YYYY-MM form")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise DataError(f"time stamp {stamp!r} has month outside 01..12")
    return 12 * year + (month - 1)


def _month_label(ordinal: int) -> str:
    return f"{ordinal // 12:04d}-{ordinal % 12 + 1:02d}"


# ---------------------------------------------------------------------------
# release data


@dataclass(frozen=True)
class ReleaseDataset:
    """One vintage of the monthly panel.

    ``node_levels`` is (n_nodes, T) and strictly positive so growth rates
    exist; ``edge_levels`` is (n_edges, T) and nonnegative — months with
    no payments on a live edge are recorded as 0.  ``time_index`` holds
    consecutive YYYY-MM stamps, one per column.
    """

    release_id: str
    network: StaticNetwork
    node_levels: np.ndarray
    edge_levels: np.ndarray
    time_index: tuple[str, ...]

    def __post_init__(self):
        nv = np.array(self.node_levels, dtype=float)
        ev = np.array(self.edge_levels, dtype=float)
        T = nv.shape[1] if nv.ndim == 2 else 0
        if nv.ndim != 2 or nv.shape[0] != self.network.n_nodes:
            raise DataError(
                f"node_levels must be ({self.network.n_nodes}, T), got {nv.shape}"
            )
        if self.network.n_edges == 0 and ev.size == 0:
            ev = np.zeros((0, T))
        if ev.shape != (self.network.n_edges, T):
            raise DataError(
                f"edge_levels must be ({self.network.n_edges}, {T}), got {ev.shape}"
            )
        if not (np.isfinite(nv).all() and np.isfinite(ev).all()):
            raise DataError("release contains non-finite values")
        if (nv <= 0).any():
            raise DataError("node levels must be strictly positive")
        if (ev < 0).any():
            raise DataError("edge levels must be nonnegative")
        idx = tuple(str(s) for s in self.time_index)
        if len(idx) != T:
            raise DataError("time_index length must match the number of columns")
        ords = [_month_ordinal(s) for s in idx]
        if any(b - a != 1 for a, b in zip(ords, ords[1:])):
            raise DataError("time_index must advance by exactly one month per column")
        nv.setflags(write=False)
        ev.setflags(write=False)
        object.__setattr__(self, "node_levels", nv)
        object.__setattr__(self, "edge_levels", ev)
        object.__setattr__(self, "time_index", idx)

    @property
    def n_times(self) -> int:
        return self.node_levels.shape[1]

    @property
    def next_month(self) -> str:
        """Stamp of the month after the sample, the one being nowcast."""
        return _month_label(_month_ordinal(self.time_index[-1]) + 1)


@dataclass(frozen=True)
class SparsificationConfig:
    """Which nodes to drop outright and how aggressively to prune edges.

    An edge whose growth series correlates with any industry growth
    series beyond ``corr_threshold`` in absolute value is removed;
    ``endpoint_only`` restricts the comparison to the edge's own two
    endpoints instead of every industry.
    """

    drop_nodes: tuple[str, ...] = ()
    corr_threshold: float = 0.4
    endpoint_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "drop_nodes", tuple(str(s) for s in self.drop_nodes))
        if not 0 < self.corr_threshold <= 1:
            raise ConfigError(
                f"corr_threshold must lie in (0, 1], got {self.corr_threshold}"
            )


# ---------------------------------------------------------------------------
# growth rates


def to_growth(levels: np.ndarray) -> np.ndarray:
    """Month-on-month growth rates along the last axis, length T-1.

    Levels must be strictly positive; anything else leaves the ratio
    undefined and raises :class:`~netpanel.errors.DataError`.
    """
    x = np.asarray(levels, dtype=float)
    if x.shape[-1] < 2:
        raise DataError("growth rates need at least two observations")
    if (x <= 0).any():
        raise DataError("growth rates are undefined for non-positive levels")
    return x[..., 1:] / x[..., :-1] - 1.0


def edge_growth(levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Growth rates for payment series that may sit at zero.

    A transition out of a zero month has no meaningful ratio, so its
    growth is set to 0 and flagged; returns ``(growth, from_zero)`` with
    matching shapes along the last axis (length T-1).
    """
    x = np.asarray(levels, dtype=float)
    if x.shape[-1] < 2:
        raise DataError("growth rates need at least two observations")
    if (x < 0).any():
        raise DataError("payment levels must be nonnegative")
    prev = x[..., :-1]
    from_zero = prev == 0
    safe_prev = np.where(from_zero, 1.0, prev)
    growth = np.where(from_zero, 0.0, x[..., 1:] / safe_prev - 1.0)
    return growth, from_zero


# ---------------------------------------------------------------------------
# network sparsification


@dataclass(frozen=True)
class SparsificationDetail:
    """What the pruning pass removed and why.

    ``edge_max_corr`` maps each surviving or removed edge label to the
    largest absolute correlation that was tested against it; labels in
    ``constant_edges`` had no variation on the growth scale, so their
    correlation was taken as 0.
    """

    dropped_nodes: tuple[str, ...]
    dropped_edges: tuple[str, ...]
    edge_max_corr: dict[str, float] = field(default_factory=dict)
    constant_edges: tuple[str, ...] = ()


def _pearson_abs_max(edge_g: np.ndarray, node_g: np.ndarray) -> tuple[float, bool]:
    """Largest |Pearson correlation| of one edge series against node rows.

    A series with zero variance on either side contributes correlation 0;
    the boolean reports whether the edge series itself was constant.
    """
    e = edge_g - edge_g.mean()
    se = math.sqrt(float(e @ e))
    if se == 0.0:
        return 0.0, True
    n = node_g - node_g.mean(axis=1, keepdims=True)
    sn = np.sqrt(np.einsum("kt,kt->k", n, n))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(sn > 0, (n @ e) / (sn * se), 0.0)
    return float(np.abs(corr).max()) if corr.size else 0.0, False


def sparsify_detail(
    release: ReleaseDataset, cfg: SparsificationConfig
) -> tuple[ReleaseDataset, SparsificationDetail]:
    """Drop listed industries, then prune collinear payment edges.

    Edge pruning works on the growth scale: an edge goes when the largest
    absolute Pearson correlation between its growth series and the growth
    series of the comparison industries (all of them, or just its two
    endpoints under ``endpoint_only``) exceeds ``cfg.corr_threshold``.
    Industries isolated by the pruning stay in the network.
    """
    net = release.network
    unknown = [s for s in cfg.drop_nodes if s not in net.node_labels]
    if unknown:
        raise ConfigError(f"drop_nodes not in the network: {', '.join(unknown)}")
    dropped = set(cfg.drop_nodes)
    keep_nodes = [i for i, lab in enumerate(net.node_labels) if lab not in dropped]
    node_map = {old: new for new, old in enumerate(keep_nodes)}

    node_lv = release.node_levels[keep_nodes]
    node_g = to_growth(node_lv)

    kept_edges: list[tuple[int, int]] = []
    kept_rows: list[int] = []
    dropped_edges: list[str] = []
    constant: list[str] = []
    max_corr: dict[str, float] = {}
    for q, (a, b) in enumerate(net.edges):
        if a not in node_map or b not in node_map:
            continue
        label = net.edge_label(q)
        g, _ = edge_growth(release.edge_levels[q])
        if cfg.endpoint_only:
            compare = node_g[[node_map[a], node_map[b]]]
        else:
            compare = node_g
        c, is_const = _pearson_abs_max(g, compare)
        max_corr[label] = c
        if is_const:
            constant.append(label)
        if c > cfg.corr_threshold:
            dropped_edges.append(label)
        else:
            kept_edges.append((node_map[a], node_map[b]))
            kept_rows.append(q)

    new_net = StaticNetwork(
        tuple(net.node_labels[i] for i in keep_nodes), tuple(kept_edges)
    )
    pruned = ReleaseDataset(
        release_id=release.release_id,
        network=new_net,
        node_levels=node_lv,
        edge_levels=release.edge_levels[kept_rows],
        time_index=release.time_index,
    )
    detail = SparsificationDetail(
        dropped_nodes=tuple(cfg.drop_nodes),
        dropped_edges=tuple(dropped_edges),
        edge_max_corr=max_corr,
        constant_edges=tuple(constant),
    )
    return pruned, detail


def sparsify(release: ReleaseDataset, cfg: SparsificationConfig) -> ReleaseDataset:
    """Pruned copy of the release; see :func:`sparsify_detail`."""
    return sparsify_detail(release, cfg)[0]


# ---------------------------------------------------------------------------
# seasonal adjustment


@dataclass(frozen=True)
class SeasonalDecomposition:
    """Additive split growth = trend + seasonal + residual, exact by
    construction.  Arrays share the input's shape; the last axis is time."""

    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int

    def next_seasonal(self) -> np.ndarray:
        """Seasonal term for the month after the sample: the value one
        full period back."""
        return self.seasonal[..., -self.period]

    def last_trend(self) -> np.ndarray:
        return self.trend[..., -1]


def _centered_ma_trend(values: np.ndarray, period: int) -> np.ndarray:
    """Centered moving-average trend along the last axis.

    For an even period the window spans period+1 points with half weight
    on the two extremes, so each average covers exactly one cycle.  The
    first and last half-window positions, where no full window fits, copy
    the nearest computed value.
    """
    if period % 2 == 0:
        w = np.full(period + 1, 1.0 / period)
        w[0] = w[-1] = 0.5 / period
    else:
        w = np.full(period, 1.0 / period)
    width = w.size
    T = values.shape[-1]
    if T < width:
        raise DataError(
            f"seasonal adjustment needs at least {width} months, got {T}"
        )
    valid = sum(w[i] * values[..., i:T - width + 1 + i] for i in range(width))
    half = width // 2
    first = valid[..., :1]
    last = valid[..., -1:]
    return np.concatenate(
        [np.repeat(first, half, axis=-1), valid, np.repeat(last, half, axis=-1)],
        axis=-1,
    )


def deseasonalize(
    growth: np.ndarray, period: int = 12, method: str = "moving_average"
) -> SeasonalDecomposition:
    """Split growth series into trend, repeating seasonal, and residual.

    The default trend is the centered moving average over one full cycle;
    the seasonal component is the per-position mean of the detrended
    series, recentred to sum to zero across a cycle.  ``method="stl"``
    swaps in the loess-based decomposition from statsmodels, whose
    seasonal component may drift slowly instead of repeating exactly.
    Either way trend + seasonal + residual reproduces the input to within
    floating-point addition.
    """
    x = np.asarray(growth, dtype=float)
    if period < 2:
        raise ConfigError(f"period must be >= 2, got {period}")
    T = x.shape[-1]
    if method == "stl":
        return _stl_decompose(x, period)
    if method != "moving_average":
        raise ConfigError(f"unknown decomposition method {method!r}")
    trend = _centered_ma_trend(x, period)
    detr = x - trend
    positions = np.arange(T) % period
    means = np.stack(
        [detr[..., positions == k].mean(axis=-1) for k in range(period)], axis=-1
    )
    means = means - means.mean(axis=-1, keepdims=True)
    seasonal = means[..., positions]
    residual = x - trend - seasonal
    return SeasonalDecomposition(trend, seasonal, residual, period)


def _stl_decompose(x: np.ndarray, period: int) -> SeasonalDecomposition:
    from statsmodels.tsa.seasonal import STL

    flat = x.reshape(-1, x.shape[-1])
    trend = np.empty_like(flat)
    seasonal = np.empty_like(flat)
    for i, row in enumerate(flat):
        res = STL(row, period=period).fit()
        trend[i] = res.trend
        seasonal[i] = res.seasonal
    trend = trend.reshape(x.shape)
    seasonal = seasonal.reshape(x.shape)
    return SeasonalDecomposition(trend, seasonal, x - trend - seasonal, period)


# ---------------------------------------------------------------------------
# nowcast scoring


@dataclass(frozen=True)
class ModelScore:
    """One model's nowcast of the next month, on the level scale.

    ``total_point`` is the sum of the industry forecasts.  Scoring fields
    are None until actuals are supplied.  ``inclusion`` is the share of
    industries whose published value fell inside the industry's interval.
    """

    label: str
    kind: str
    node_point: np.ndarray
    node_lower: np.ndarray
    node_upper: np.ndarray
    max_lag: int | None = None
    stage: int | None = None
    relative_error: float | None = None
    node_relative_errors: np.ndarray | None = None
    inclusion: float | None = None

    @property
    def total_point(self) -> float:
        return float(self.node_point.sum())


@dataclass(frozen=True)
class NowcastReport:
    """All scored models for one release."""

    release_id: str
    target_month: str
    network: StaticNetwork
    rows: tuple[ModelScore, ...]
    actual_total: float | None = None

    def row(self, label: str) -> ModelScore:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(f"no model labelled {label!r} in this report")

    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.rows)


def _score(
    label: str,
    kind: str,
    point: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    actuals: np.ndarray | None,
    max_lag: int | None = None,
    stage: int | None = None,
) -> ModelScore:
    rel = None
    node_rel = None
    incl = None
    if actuals is not None:
        node_rel = np.abs(point - actuals) / actuals
        node_rel.setflags(write=False)
        total = float(point.sum())
        actual_total = float(actuals.sum())
        rel = abs(total - actual_total) / actual_total
        incl = float(np.mean((lower <= actuals) & (actuals <= upper)))
    for arr in (point, lower, upper):
        arr.setflags(write=False)
    return ModelScore(
        label=label,
        kind=kind,
        node_point=point,
        node_lower=lower,
        node_upper=upper,
        max_lag=max_lag,
        stage=stage,
        relative_error=rel,
        node_relative_errors=node_rel,
        inclusion=incl,
    )


class _PreparedRelease:
    """Shared growth/decomposition work reused across model orders."""

    def __init__(self, release: ReleaseDataset, cfg: SparsificationConfig,
                 method: str, period: int):
        self.release, self.detail = sparsify_detail(release, cfg)
        if self.release.n_times < _MIN_MONTHS:
            raise DataError(
                f"nowcasting needs at least {_MIN_MONTHS} months after "
                f"sparsification, got {self.release.n_times}"
            )
        net = self.release.network
        node_g = to_growth(self.release.node_levels)
        edge_g, self.from_zero = edge_growth(self.release.edge_levels)
        stacked_g = np.vstack([edge_g, node_g])
        self.decomp = deseasonalize(stacked_g, period=period, method=method)
        self.growth_scale = float(np.abs(stacked_g).max()) if stacked_g.size else 0.0
        self.panel = PanelSeries(
            net,
            self.decomp.residual[net.n_edges:],
            self.decomp.residual[:net.n_edges],
            self.release.time_index[1:],
        )
        self.last_node_level = self.release.node_levels[:, -1]
        # offset from residual scale back to the growth scale for the
        # nowcast month: next period's seasonal plus the trend held flat
        self.growth_offset = self.decomp.next_seasonal() + self.decomp.last_trend()

    def residuals_degenerate(self) -> bool:
        tol = 1e-10 * max(1.0, self.growth_scale)
        return bool(np.abs(self.decomp.residual).max() <= tol)

    def level_nowcast(self, resid_point: np.ndarray, resid_half_width: np.ndarray):
        """Map residual-scale nodal forecasts to level-scale bounds."""
        m = self.release.network.n_edges
        g = resid_point[m:] + self.growth_offset[m:]
        hw = resid_half_width[m:]
        base = self.last_node_level
        return base * (1 + g), base * (1 + g - hw), base * (1 + g + hw)


def _network_score(
    prep: _PreparedRelease,
    order: ModelOrder,
    level: float,
    actuals: np.ndarray | None,
) -> ModelScore:
    stage = order.max_stage
    label = f"net_lag{order.max_lag}_stage{stage}"
    d = prep.release.network.n_edges + prep.release.network.n_nodes
    if prep.residuals_degenerate():
        # nothing left to model after seasonal adjustment: the nowcast is
        # the deterministic seasonal-plus-trend path with zero variance
        point = np.zeros(d)
        half = np.zeros(d)
    else:
        fitted = fit(prep.panel, order)
        fc = forecast(fitted, 1, level=level)
        point = np.concatenate([fc.edge_point[:, 0], fc.node_point[:, 0]])
        half = np.concatenate([
            fc.edge_point[:, 0] - fc.edge_lower[:, 0],
            fc.node_point[:, 0] - fc.node_lower[:, 0],
        ])
    pt, lo, hi = prep.level_nowcast(point, half)
    return _score(label, "network", pt, lo, hi, actuals,
                  max_lag=order.max_lag, stage=stage)


def _baseline_scores(
    release: ReleaseDataset, level: float, actuals: np.ndarray | None
) -> list[ModelScore]:
    """ARIMA comparisons fitted industry by industry on the raw levels."""
    levels = release.node_levels
    fits = auto_arima_batch(levels)
    point, lower, upper = batch_forecast(fits, levels, 1, level=level)
    rows = [_score("arima_auto", "baseline",
                   point[:, 0], lower[:, 0], upper[:, 0], actuals)]
    drift_fits = [rw_drift_fit(levels[i]) for i in range(levels.shape[0])]
    point, lower, upper = batch_forecast(drift_fits, levels, 1, level=level)
    rows.append(_score("arima_random_walk", "baseline",
                       point[:, 0], lower[:, 0], upper[:, 0], actuals))
    return rows


def _check_actuals(release: ReleaseDataset, next_actuals) -> np.ndarray | None:
    if next_actuals is None:
        return None
    a = np.asarray(next_actuals, dtype=float)
    if a.shape != (release.network.n_nodes,):
        raise DataError(
            f"next_actuals must have one value per industry "
            f"({release.network.n_nodes}), got shape {a.shape}"
        )
    if (a <= 0).any():
        raise DataError("next_actuals must be strictly positive")
    return a


def nowcast_release(
    release: ReleaseDataset,
    cfg: SparsificationConfig,
    orders: list[ModelOrder],
    next_actuals=None,
    level: float = 0.95,
    include_baselines: bool = True,
    method: str = "moving_average",
    period: int = 12,
) -> NowcastReport:
    """Nowcast the month after the sample with each requested model order.

    Each order follows the same path: growth rates, seasonal adjustment,
    network autoregression on the residuals, one-step forecast, then
    reconstruction (residual forecast + next seasonal + last trend,
    applied to the last level).  Baselines skip the pipeline and model
    the raw industry levels directly.  When ``next_actuals`` is given
    every row carries its relative error on total output, per-industry
    relative errors, and the share of industries inside their intervals.
    """
    if not orders:
        raise ConfigError("at least one model order is required")
    prep = _PreparedRelease(release, cfg, method, period)
    actuals = _check_actuals(prep.release, next_actuals)
    rows = [_network_score(prep, order, level, actuals) for order in orders]
    if include_baselines:
        rows.extend(_baseline_scores(prep.release, level, actuals))
    return NowcastReport(
        release_id=release.release_id,
        target_month=release.next_month,
        network=prep.release.network,
        rows=tuple(rows),
        actual_total=float(actuals.sum()) if actuals is not None else None,
    )


def model_average_release(
    release: ReleaseDataset,
    cfg: SparsificationConfig,
    next_actuals=None,
    lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9),
    stage: int = 1,
    level: float = 0.95,
    include_baselines: bool = False,
    method: str = "moving_average",
    period: int = 12,
) -> NowcastReport:
    """Equal-weight average of the lag ladder at one neighbourhood stage.

    Runs :func:`nowcast_release` over the requested lags, then appends an
    ``"average"`` row whose point forecasts are the plain mean across
    lags and whose industry intervals are the unions (smallest lower to
    largest upper bound) of the per-lag intervals.
    """
    orders = [ModelOrder.uniform(l, stage) for l in lags]
    report = nowcast_release(
        release, cfg, orders, next_actuals=next_actuals, level=level,
        include_baselines=include_baselines, method=method, period=period,
    )
    return append_average_row(report, next_actuals=next_actuals,
                              lags=lags, stage=stage)


def append_average_row(
    report: NowcastReport,
    next_actuals=None,
    lags: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9),
    stage: int = 1,
) -> NowcastReport:
    """Report with an ``"average"`` row combining existing member rows.

    The members are the already-scored ``net_lag{l}_stage{stage}`` rows,
    so a report that covers a whole lag/stage grid gains its average
    without refitting anything.
    """
    try:
        members = [report.row(f"net_lag{l}_stage{stage}") for l in lags]
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    point = np.mean([r.node_point for r in members], axis=0)
    lower = np.min([r.node_lower for r in members], axis=0)
    upper = np.max([r.node_upper for r in members], axis=0)
    actuals = None
    if next_actuals is not None:
        actuals = np.asarray(next_actuals, dtype=float)
    avg = _score("average", "average", point, lower, upper, actuals)
    return NowcastReport(
        release_id=report.release_id,
        target_month=report.target_month,
        network=report.network,
        rows=report.rows + (avg,),
        actual_total=report.actual_total,
    )


# ---------------------------------------------------------------------------
# cross-release summary


@dataclass(frozen=True)
class IndustrySummary:
    """Relative-error behaviour per industry across a set of releases."""

    industries: tuple[str, ...]
    mean_error: np.ndarray
    sd_error: np.ndarray
    top_per_release: dict[str, tuple[tuple[str, float], ...]]
    model_label: str
    scaled_by_sqrt_t: bool


def industry_summary(
    reports: list[NowcastReport],
    model_label: str | None = None,
    top_k: int = 3,
    scale_by_sqrt_t: bool = False,
    n_months: int | None = None,
) -> IndustrySummary:
    """Mean and spread of per-industry relative errors across releases.

    All reports must score the same industries with the chosen model
    (default: ``"average"`` when present, otherwise the first row).
    ``scale_by_sqrt_t`` multiplies each error by sqrt(n_months) — with
    the conventional 48-month sample this is a factor of about 6.93 —
    so a single release's error can sit on the same footing as an
    average over many.
    """
    if not reports:
        raise ConfigError("at least one report is required")
    if model_label is None:
        model_label = "average" if "average" in reports[0].labels() else reports[0].rows[0].label
    first = reports[0]
    industries = first.network.node_labels
    rows = []
    top: dict[str, tuple[tuple[str, float], ...]] = {}
    for rep in reports:
        if rep.network.node_labels != industries:
            raise DataError("reports cover different industry sets")
        score = rep.row(model_label)
        if score.node_relative_errors is None:
            raise DataError(
                f"report {rep.release_id!r} has no actuals to summarise"
            )
        err = np.asarray(score.node_relative_errors, dtype=float)
        if scale_by_sqrt_t:
            if n_months is None:
                raise ConfigError("scale_by_sqrt_t requires n_months")
            err = err * math.sqrt(n_months)
        rows.append(err)
        order = np.argsort(err)[::-1][:top_k]
        top[rep.release_id] = tuple((industries[i], float(err[i])) for i in order)
    stacked = np.vstack(rows)
    mean = stacked.mean(axis=0)
    sd = stacked.std(axis=0, ddof=0)
    mean.setflags(write=False)
    sd.setflags(write=False)
    return IndustrySummary(
        industries=industries,
        mean_error=mean,
        sd_error=sd,
        top_per_release=top,
        model_label=model_label,
        scaled_by_sqrt_t=scale_by_sqrt_t,
    )
