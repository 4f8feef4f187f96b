"""Random graph models, process simulation and replication studies.

Three directed random-graph families are provided, each calibrated so its
expected edge density (fraction of ordered node pairs present) hits a
requested target exactly in expectation:

* independent uniform edges (one probability for every ordered pair);
* a two-block model whose within-block probability is a fixed multiple of
  the between-block probability;
* a random dot-product model with uniform latent positions, where the edge
  probability is the clamped inner product of the endpoint latents and the
  latent scale is solved numerically from the exact expectation.

Panels are simulated by iterating the vector-autoregressive form of the
network model from a zero initial state through a burn-in period, with
independent Gaussian innovations and a spectral-radius guard against
explosive dynamics.  The replication harnesses refit a model on many
simulated panels, score coefficient recovery and interval coverage, and
compare one-step predictions against univariate baselines.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .baselines import auto_arima_batch, batch_forecast
from .errors import NumericError, StationarityError
from .graph import StaticNetwork
from .model import (
    Coefficients,
    ModelOrder,
    PanelSeries,
    fit,
    forecast,
    model_average,
    slot_weights,
    spectral_radius,
    to_var,
)


# ---------------------------------------------------------------------------
# graph models


def _rdp_excess(c: float) -> float:
    """E[(V1 + V2 - c)^+] where each V is a product of two Uniform(0,1).

    The product density is -log(v) on (0, 1]; the inner integral over one
    variable has a closed form, leaving a single smooth quadrature.
    """
    if c >= 2.0:
        return 0.0
    if c <= 0.0:
        return 0.5 - c

    def antideriv(v: float, a: float) -> float:
        if v <= 0.0:
            return 0.0
        lv = math.log(v)
        return -(0.5 * v * v * lv - 0.25 * v * v + a * (v * lv - v))

    def inner(v1: float) -> float:
        a = v1 - c
        m = max(0.0, c - v1)
        if m >= 1.0:
            return 0.0
        return antideriv(1.0, a) - antideriv(m, a)

    lo = max(0.0, c - 1.0)
    kwargs = {"limit": 200}
    if lo < c < 1.0:
        kwargs["points"] = [c]
    val, _ = quad(lambda v: -math.log(v) * inner(v) if v > 0 else 0.0, lo, 1.0, **kwargs)
    return val


def _rdp_density(scale: float) -> float:
    """Expected clamped dot product of two uniform [0, scale]^2 latents."""
    if scale <= 0.0:
        return 0.0
    s2 = scale * scale
    return s2 * (0.5 - _rdp_excess(1.0 / s2))


def _rdp_scale(density: float) -> float:
    hi = math.sqrt(2.0 * density)
    for _ in range(60):
        if _rdp_density(hi) >= density:
            break
        hi *= 1.5
    else:
        raise NumericError(f"could not bracket latent scale for density {density}")
    return float(brentq(lambda s: _rdp_density(s) - density, 1e-9, hi, xtol=1e-12))


def _sbm_blocks(n_nodes: int) -> np.ndarray:
    half = (n_nodes + 1) // 2
    return (np.arange(n_nodes) >= half).astype(int)


def _sbm_pair_counts(n_nodes: int) -> tuple[int, int]:
    blocks = _sbm_blocks(n_nodes)
    sizes = np.bincount(blocks, minlength=2)
    within = int(sum(s * (s - 1) for s in sizes))
    between = n_nodes * (n_nodes - 1) - within
    return within, between


@dataclass(frozen=True)
class GraphModel:
    """A calibrated random-graph family over a fixed node count.

    Use the named constructors; they derive the kind-specific probability
    parameters so that :func:`expected_density` equals ``target_density``.
    """

    kind: str
    n_nodes: int
    target_density: float
    edge_prob: float = 0.0
    within_prob: float = 0.0
    between_prob: float = 0.0
    latent_scale: float = 0.0
    latent_dim: int = 2

    def __post_init__(self):
        if self.kind not in ("er", "sbm", "rdp"):
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if not (0.0 < self.target_density < 1.0):
            raise ValueError("target density must lie strictly between 0 and 1")
        for name in ("edge_prob", "within_prob", "between_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.kind == "rdp" and self.latent_dim != 2:
            raise ValueError("only two-dimensional latent positions are supported")

    @staticmethod
    def erdos_renyi(n_nodes: int, density: float) -> "GraphModel":
        return GraphModel("er", n_nodes, density, edge_prob=density)

    @staticmethod
    def stochastic_block(n_nodes: int, density: float,
                         within_between_ratio: float = 2.0) -> "GraphModel":
        if within_between_ratio <= 0:
            raise ValueError("ratio must be positive")
        within, between = _sbm_pair_counts(n_nodes)
        bp = density * n_nodes * (n_nodes - 1) / (within_between_ratio * within + between)
        wp = within_between_ratio * bp
        if wp > 1.0:
            raise ValueError(
                f"density {density} with ratio {within_between_ratio} needs "
                f"within-block probability {wp:.3f} > 1"
            )
        return GraphModel("sbm", n_nodes, density, within_prob=wp, between_prob=bp)

    @staticmethod
    def random_dot_product(n_nodes: int, density: float) -> "GraphModel":
        return GraphModel("rdp", n_nodes, density, latent_scale=_rdp_scale(density))


def expected_density(model: GraphModel) -> float:
    """Analytic expected fraction of ordered pairs present under the model."""
    if model.kind == "er":
        return model.edge_prob
    if model.kind == "sbm":
        within, between = _sbm_pair_counts(model.n_nodes)
        total = model.n_nodes * (model.n_nodes - 1)
        return (within * model.within_prob + between * model.between_prob) / total
    return _rdp_density(model.latent_scale)


def generate_graph(model: GraphModel, seed) -> StaticNetwork:
    """Draw one directed graph; retries (up to 10) if no edge appears.

    Edge positions follow row-major order over ordered node pairs, which
    fixes the edge labelling for everything downstream.
    """
    rng = np.random.default_rng(seed)
    k = model.n_nodes
    width = len(str(k))
    labels = tuple(f"n{i + 1:0{width}d}" for i in range(k))
    if model.kind == "er":
        probs = np.full((k, k), model.edge_prob)
    elif model.kind == "sbm":
        blocks = _sbm_blocks(k)
        same = blocks[:, None] == blocks[None, :]
        probs = np.where(same, model.within_prob, model.between_prob)
    for attempt in range(10):
        if model.kind == "rdp":
            latents = rng.random((k, model.latent_dim)) * model.latent_scale
            probs = np.clip(latents @ latents.T, 0.0, 1.0)
        mask = rng.random((k, k)) < probs
        np.fill_diagonal(mask, False)
        edges = tuple(
            (i, j) for i in range(k) for j in range(k) if mask[i, j]
        )
        if edges:
            return StaticNetwork(labels, edges)
    raise NumericError(
        f"no edges after 10 draws from {model.kind} with density "
        f"{model.target_density}"
    )


# ---------------------------------------------------------------------------
# regimes and simulation


@dataclass(frozen=True)
class SimulationRegime:
    """A complete recipe for simulated panels: dynamics, graph family,
    sample length, burn-in and innovation scale."""

    coefficients: Coefficients
    graph_model: GraphModel
    n_times: int = 200
    burn_in: int = 50
    noise_sd: float = 0.1
    name: str = ""

    def __post_init__(self):
        if self.n_times < 1:
            raise ValueError("n_times must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")

    @property
    def order(self) -> ModelOrder:
        return self.coefficients.order


_STANDARD_THETA = {
    1: (ModelOrder(1, (1,)), (0.2, 0.2, 0.3, 0.2)),
    2: (ModelOrder(1, (2,)), (0.2, -0.2, 0.1, 0.1, 0.05, -0.2)),
    3: (
        ModelOrder(2, (2, 2)),
        (-0.1, 0.1, -0.2, 0.01, 0.02, -0.01,
         0.3, -0.02, 0.03, 0.01, -0.02, 0.01),
    ),
}


def standard_regime(index: int, graph_model: GraphModel, n_times: int = 200,
                    burn_in: int = 50, noise_sd: float = 0.1) -> SimulationRegime:
    """One of the three built-in coefficient settings (1, 2 or 3)."""
    if index not in _STANDARD_THETA:
        raise ValueError(f"regime index must be 1, 2 or 3, got {index}")
    order, theta = _STANDARD_THETA[index]
    coeffs = Coefficients.from_theta(order, theta, sigma2=noise_sd**2)
    return SimulationRegime(coeffs, graph_model, n_times, burn_in, noise_sd,
                            name=f"regime{index}")


def simulate_panel(net: StaticNetwork, regime: SimulationRegime, seed,
                   literal_nested: bool = False) -> PanelSeries:
    """Iterate the process from a zero state through burn-in plus sample.

    Raises :class:`~netpanel.errors.StationarityError` when the companion
    spectral radius reaches one.  With ``literal_nested`` the node
    equations use the nested (cross-coefficient-scaled) reading of the
    neighbourhood term; estimation is unaffected by that switch.
    """
    order = regime.order
    weights = slot_weights(net, max_stage=order.max_stage)
    mats = to_var(net, regime.coefficients, weights=weights,
                  literal_nested=literal_nested)
    radius = spectral_radius(mats)
    if radius >= 1.0:
        raise StationarityError(radius)
    rng = np.random.default_rng(seed)
    L = order.max_lag
    d = net.n_edges + net.n_nodes
    total = regime.burn_in + regime.n_times
    eps = rng.normal(0.0, regime.noise_sd, size=(d, total))
    y = np.zeros((d, L + total))
    for t in range(total):
        col = L + t
        acc = eps[:, t].copy()
        for l in range(1, L + 1):
            acc += mats[l - 1] @ y[:, col - l]
        y[:, col] = acc
    keep = y[:, L + regime.burn_in:]
    labels = tuple(f"t{i + 1:04d}" for i in range(regime.n_times))
    return PanelSeries.from_stacked(net, keep, labels)


# ---------------------------------------------------------------------------
# replication studies

PREDICTION_MODELS = ("netar", "netar_stage0", "arima_auto", "arima_010")


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated results of :func:`replicate_experiment`."""

    regime_name: str
    graph_kind: str
    n_replications: int
    level: float
    coefficient_names: tuple[str, ...]
    true_theta: np.ndarray
    estimates: np.ndarray          # (n_ok, p)
    coverage_hits: np.ndarray      # (n_ok, p) booleans
    prediction_records: tuple[tuple[str, int, float, float], ...]
    failures: tuple[tuple[int, str], ...]

    @property
    def n_successful(self) -> int:
        return self.estimates.shape[0]

    def coefficient_rmse(self) -> np.ndarray:
        err = self.estimates - self.true_theta[None, :]
        return np.sqrt((err**2).mean(axis=0))

    def coefficient_coverage(self) -> np.ndarray:
        return self.coverage_hits.mean(axis=0)

    def coefficient_rows(self) -> list[dict]:
        rmse = self.coefficient_rmse()
        cov = self.coefficient_coverage()
        return [
            {
                "coefficient": name,
                "true_value": float(self.true_theta[i]),
                "rmse": float(rmse[i]),
                "coverage": float(cov[i]),
            }
            for i, name in enumerate(self.coefficient_names)
        ]

    def prediction_rows(self) -> list[dict]:
        return [
            {
                "model": model,
                "rep": rep,
                "prediction_rmse_all": rmse_all,
                "prediction_rmse_nodes": rmse_nodes,
            }
            for model, rep, rmse_all, rmse_nodes in self.prediction_records
        ]

    def median_prediction_rmse(self, model: str, nodes_only: bool = False) -> float:
        vals = [
            (rn if nodes_only else ra)
            for m, _, ra, rn in self.prediction_records
            if m == model
        ]
        if not vals:
            raise ValueError(f"no predictions recorded for model {model!r}")
        return float(np.median(vals))


def _replication_draw(regime: SimulationRegime, child: np.random.SeedSequence):
    """Graph and panel for one replication from one seed branch."""
    g_ss, p_ss = child.spawn(2)
    net = generate_graph(regime.graph_model, g_ss)
    panel = simulate_panel(net, regime, p_ss)
    return net, panel


def _replication_worker(args):
    regime, child, level, include_baselines = args
    net, panel = _replication_draw(regime, child)
    train = panel.window(panel.n_times - 1)
    truth = panel.stacked()[:, -1]
    m = net.n_edges
    order = regime.order

    res = fit(train, order)
    ci = res.conf_int(level)
    true_theta = regime.coefficients.to_theta()
    covered = (ci[:, 0] <= true_theta) & (true_theta <= ci[:, 1])

    preds: dict[str, np.ndarray] = {}
    preds["netar"] = forecast(res, 1, level).stacked_point()[:, 0]
    own_only = fit(train, ModelOrder(order.max_lag, (0,) * order.max_lag))
    preds["netar_stage0"] = forecast(own_only, 1, level).stacked_point()[:, 0]
    if include_baselines:
        vals = train.stacked()
        fits = auto_arima_batch(vals)
        point, _, _ = batch_forecast(fits, vals, 1, level)
        preds["arima_auto"] = point[:, 0]
        drift = np.diff(vals, axis=1).mean(axis=1)
        preds["arima_010"] = vals[:, -1] + drift

    rmse = {}
    for name, p in preds.items():
        err = p - truth
        rmse[name] = (
            float(np.sqrt((err**2).mean())),
            float(np.sqrt((err[m:] ** 2).mean())),
        )
    return res.theta, covered, rmse


def replicate_experiment(regime: SimulationRegime, n_replications: int,
                         master_seed: int, level: float = 0.95,
                         include_baselines: bool = True,
                         jobs: int = 1) -> SimulationReport:
    """Repeatedly draw a graph and panel, refit, and score the results.

    Each replication fits on all but the final time point and predicts it.
    A replication that fails (degenerate graph, singular design,
    non-convergent baseline) is recorded under ``failures`` and excluded
    from the aggregates rather than aborting the study.
    """
    if n_replications < 1:
        raise ValueError("need at least one replication")
    children = np.random.SeedSequence(master_seed).spawn(n_replications)
    args = [(regime, child, level, include_baselines) for child in children]
    outcomes: list = [None] * n_replications
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, out in enumerate(pool.map(_try_replication, args)):
                outcomes[i] = out
    else:
        for i, a in enumerate(args):
            outcomes[i] = _try_replication(a)

    estimates, hits, records, failures = [], [], [], []
    for rep, out in enumerate(outcomes):
        if isinstance(out, str):
            failures.append((rep, out))
            continue
        theta, covered, rmse = out
        estimates.append(theta)
        hits.append(covered)
        for model, (ra, rn) in rmse.items():
            records.append((model, rep, ra, rn))
    if not estimates:
        raise NumericError("every replication failed")
    order = regime.order
    return SimulationReport(
        regime_name=regime.name or "custom",
        graph_kind=regime.graph_model.kind,
        n_replications=n_replications,
        level=level,
        coefficient_names=tuple(order.coefficient_names()),
        true_theta=regime.coefficients.to_theta(),
        estimates=np.asarray(estimates),
        coverage_hits=np.asarray(hits),
        prediction_records=tuple(records),
        failures=tuple(failures),
    )


def _try_replication(args):
    try:
        return _replication_worker(args)
    except Exception as exc:  # recorded, not raised: one bad draw must not kill a study
        return f"{type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class AverageInclusionReport:
    """Results of :func:`model_average_experiment`: how often the pooled
    interval captures each node's realised value."""

    regime_name: str
    graph_kind: str
    n_replications: int
    level: float
    lags: tuple[int, ...]
    stage: int
    n_nodes: int
    inclusion_counts: np.ndarray   # (n_ok,) nodes covered per replication
    rmse_records: tuple[tuple[str, int, float], ...]  # model, rep, node rmse
    failures: tuple[tuple[int, str], ...]

    @property
    def n_successful(self) -> int:
        return self.inclusion_counts.shape[0]

    def inclusion_distribution(self) -> list[dict]:
        counts = np.bincount(self.inclusion_counts, minlength=self.n_nodes + 1)
        out = []
        for c in range(self.n_nodes + 1):
            if counts[c]:
                out.append({
                    "included_nodes": c,
                    "proportion": counts[c] / self.n_successful,
                })
        return out

    def inclusion_proportions(self) -> np.ndarray:
        """Dense distribution: entry c is the share of replications in
        which exactly c node values fell inside the union interval."""
        counts = np.bincount(self.inclusion_counts, minlength=self.n_nodes + 1)
        return counts / self.n_successful

    def rmse_rows(self) -> list[dict]:
        return [
            {"model": model, "rep": rep, "prediction_rmse_nodes": rmse}
            for model, rep, rmse in self.rmse_records
        ]


def _ma_worker(args):
    regime, child, lags, stage, level = args
    net, panel = _replication_draw(regime, child)
    train = panel.window(panel.n_times - 1)
    node_truth = panel.node_values[:, -1]
    fcs = []
    rmses = []
    for lag in lags:
        res = fit(train, ModelOrder.uniform(lag, stage))
        fc = forecast(res, 1, level)
        fcs.append(fc)
        err = fc.node_point[:, 0] - node_truth
        rmses.append((f"lag{lag}", float(np.sqrt((err**2).mean()))))
    avg = model_average(fcs)
    included = int(np.sum(
        (avg.node_lower[:, 0] <= node_truth) & (node_truth <= avg.node_upper[:, 0])
    ))
    err = avg.node_point[:, 0] - node_truth
    rmses.append(("average", float(np.sqrt((err**2).mean()))))
    return included, rmses


def _try_ma(args):
    try:
        return _ma_worker(args)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def model_average_experiment(regime: SimulationRegime, n_replications: int,
                             master_seed: int, lags: tuple[int, ...] = tuple(range(1, 10)),
                             stage: int = 1, level: float = 0.95,
                             jobs: int = 1) -> AverageInclusionReport:
    """Fit a ladder of lag orders, pool them uniformly, and count how many
    node values the pooled (union) interval captures one step ahead."""
    if n_replications < 1:
        raise ValueError("need at least one replication")
    children = np.random.SeedSequence(master_seed).spawn(n_replications)
    args = [(regime, child, tuple(lags), stage, level) for child in children]
    outcomes: list = [None] * n_replications
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, out in enumerate(pool.map(_try_ma, args)):
                outcomes[i] = out
    else:
        for i, a in enumerate(args):
            outcomes[i] = _try_ma(a)

    counts, records, failures = [], [], []
    for rep, out in enumerate(outcomes):
        if isinstance(out, str):
            failures.append((rep, out))
            continue
        included, rmses = out
        counts.append(included)
        for model, rmse in rmses:
            records.append((model, rep, rmse))
    if not counts:
        raise NumericError("every replication failed")
    return AverageInclusionReport(
        regime_name=regime.name or "custom",
        graph_kind=regime.graph_model.kind,
        n_replications=n_replications,
        level=level,
        lags=tuple(lags),
        stage=stage,
        n_nodes=regime.graph_model.n_nodes,
        inclusion_counts=np.asarray(counts, dtype=int),
        rmse_records=tuple(records),
        failures=tuple(failures),
    )
