"""Restricted network autoregression over node and edge series.

Every series in the panel — one per node, one per edge — follows the same
lag structure.  For lag ``l`` the regressors of a *node* series are: its own
past value, the mean of node values over each stage-r node neighbourhood,
the mean of edge values over the node's incident edges, and an incident-edge
average of stage-r edge-neighbourhood means.  For an *edge* series they are:
its own past value, the mean over each stage-r edge neighbourhood, the mean
of the two endpoint node values, and the mean of node values over the union
of the endpoints' stage-r node neighbourhoods (endpoints excluded).  An
average over an empty set contributes zero.

Coefficients are shared across all series: per lag one own-past weight, one
neighbourhood weight per stage, one cross weight (edges explaining a node,
nodes explaining an edge) and one cross-neighbourhood weight per stage.
Estimation is ordinary least squares on the stacked per-series equations
with a single innovation variance.

Everything is expressed through per-stage weight matrices acting on the
stacked state vector (edge series first, then node series).  That one
construction yields the design matrix, the equivalent unrestricted VAR lag
matrices, fast simulation, and multi-step forecast variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import SingularityError
from .graph import NeighborhoodTables, StaticNetwork, build_neighborhood_tables

_Z_TABLE_975 = 1.959963984540054  # Phi^{-1}(0.975)


def _normal_quantile(level: float) -> float:
    if not (0.0 < level < 1.0):
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if abs(level - 0.95) < 1e-12:
        return _Z_TABLE_975
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2.0))


@dataclass(frozen=True)
class ModelOrder:
    """Lag count and per-lag neighbourhood depth.

    ``stages[l-1]`` is the maximum neighbourhood stage used at lag ``l``;
    zero switches the neighbourhood terms off at that lag while keeping the
    own-past and cross terms.
    """

    max_lag: int
    stages: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(int(s) for s in self.stages))
        if self.max_lag < 1:
            raise ValueError("max_lag must be >= 1")
        if len(self.stages) != self.max_lag:
            raise ValueError(
                f"stages has {len(self.stages)} entries for max_lag={self.max_lag}"
            )
        if any(s < 0 for s in self.stages):
            raise ValueError("stages must be >= 0")

    @staticmethod
    def uniform(max_lag: int, stage: int) -> "ModelOrder":
        return ModelOrder(max_lag, (stage,) * max_lag)

    @property
    def max_stage(self) -> int:
        return max(self.stages, default=0)

    @property
    def n_params(self) -> int:
        return 2 * self.max_lag + 2 * sum(self.stages)

    def coefficient_names(self) -> list[str]:
        names: list[str] = []
        for l in range(1, self.max_lag + 1):
            rr = self.stages[l - 1]
            names.append(f"alpha_{l}")
            names.extend(f"beta_{l}_{r}" for r in range(1, rr + 1))
            names.append(f"gamma_{l}")
            names.extend(f"delta_{l}_{r}" for r in range(1, rr + 1))
        return names


@dataclass(frozen=True)
class Coefficients:
    """Shared coefficient values for a :class:`ModelOrder`.

    ``alpha[l-1]`` own-past, ``beta[l-1][r-1]`` node/edge neighbourhood,
    ``gamma[l-1]`` cross, ``delta[l-1][r-1]`` cross-neighbourhood weights;
    ``sigma2`` the innovation variance (zero until estimated).
    """

    alpha: tuple[float, ...]
    beta: tuple[tuple[float, ...], ...]
    gamma: tuple[float, ...]
    delta: tuple[tuple[float, ...], ...]
    sigma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(
            self, "beta", tuple(tuple(float(b) for b in row) for row in self.beta)
        )
        object.__setattr__(
            self, "delta", tuple(tuple(float(d) for d in row) for row in self.delta)
        )
        L = len(self.alpha)
        if not (len(self.beta) == len(self.gamma) == len(self.delta) == L):
            raise ValueError("alpha, beta, gamma, delta must cover the same lags")
        for l in range(L):
            if len(self.beta[l]) != len(self.delta[l]):
                raise ValueError(
                    f"lag {l + 1}: beta and delta must share the stage count"
                )
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")

    @property
    def order(self) -> ModelOrder:
        return ModelOrder(len(self.alpha), tuple(len(b) for b in self.beta))

    def to_theta(self) -> np.ndarray:
        """Flatten in canonical order: per lag, alpha, betas, gamma, deltas."""
        out: list[float] = []
        for l in range(len(self.alpha)):
            out.append(self.alpha[l])
            out.extend(self.beta[l])
            out.append(self.gamma[l])
            out.extend(self.delta[l])
        return np.asarray(out, dtype=float)

    @staticmethod
    def from_theta(order: ModelOrder, theta: Sequence[float], sigma2: float = 0.0) -> "Coefficients":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (order.n_params,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({order.n_params},)"
            )
        alpha, beta, gamma, delta = [], [], [], []
        k = 0
        for l in range(order.max_lag):
            rr = order.stages[l]
            alpha.append(theta[k]); k += 1
            beta.append(tuple(theta[k:k + rr])); k += rr
            gamma.append(theta[k]); k += 1
            delta.append(tuple(theta[k:k + rr])); k += rr
        return Coefficients(tuple(alpha), tuple(beta), tuple(gamma), tuple(delta), sigma2)


@dataclass(frozen=True)
class PanelSeries:
    """Aligned node and edge series on a shared time grid.

    ``node_values`` is (n_nodes, T), ``edge_values`` (n_edges, T); column t
    of both holds the simultaneous observation labelled ``time_index[t]``.
    Arrays are stored read-only.
    """

    network: StaticNetwork
    node_values: np.ndarray
    edge_values: np.ndarray
    time_index: tuple[str, ...]

    def __post_init__(self):
        nv = np.array(self.node_values, dtype=float)
        if nv.ndim != 2 or nv.shape[0] != self.network.n_nodes:
            raise ValueError(
                f"node_values must be ({self.network.n_nodes}, T), got {nv.shape}"
            )
        T = nv.shape[1]
        ev = np.array(self.edge_values, dtype=float)
        if self.network.n_edges == 0 and ev.size == 0:
            ev = np.zeros((0, T))
        if ev.shape != (self.network.n_edges, T):
            raise ValueError(
                f"edge_values must be ({self.network.n_edges}, {T}), got {ev.shape}"
            )
        if not (np.isfinite(nv).all() and np.isfinite(ev).all()):
            raise ValueError("panel contains non-finite values")
        idx = tuple(str(s) for s in self.time_index)
        if len(idx) != nv.shape[1]:
            raise ValueError("time_index length must match the number of columns")
        nv.setflags(write=False)
        ev.setflags(write=False)
        object.__setattr__(self, "node_values", nv)
        object.__setattr__(self, "edge_values", ev)
        object.__setattr__(self, "time_index", idx)

    @property
    def n_times(self) -> int:
        return self.node_values.shape[1]

    def stacked(self) -> np.ndarray:
        """(n_edges + n_nodes, T) array, edge rows first then node rows."""
        return np.vstack([self.edge_values, self.node_values])

    @staticmethod
    def from_stacked(net: StaticNetwork, y: np.ndarray, time_index: Sequence[str]) -> "PanelSeries":
        m = net.n_edges
        return PanelSeries(net, y[m:], y[:m], tuple(time_index))

    def window(self, stop: int) -> "PanelSeries":
        """Panel restricted to the first ``stop`` time points."""
        if not (1 <= stop <= self.n_times):
            raise ValueError(f"stop={stop} outside 1..{self.n_times}")
        return PanelSeries(
            self.network,
            self.node_values[:, :stop],
            self.edge_values[:, :stop],
            self.time_index[:stop],
        )


# ---------------------------------------------------------------------------
# slot-weight matrices


@dataclass(frozen=True)
class SlotWeights:
    """Averaging matrices on the stacked state (edges first, then nodes).

    ``beta[r-1] @ y`` evaluates every series' stage-r own-kind
    neighbourhood mean, ``gamma @ y`` the cross-kind means, and
    ``delta[r-1] @ y`` the stage-r cross-kind neighbourhood terms.  Rows
    belonging to empty sets are identically zero.
    """

    beta: tuple[np.ndarray, ...]
    gamma: np.ndarray
    delta: tuple[np.ndarray, ...]


def slot_weights(
    net: StaticNetwork,
    tables: NeighborhoodTables | None = None,
    max_stage: int | None = None,
) -> SlotWeights:
    """Build the stage-wise averaging matrices for ``net``.

    The stacked coordinate order is edge positions ``0..M-1`` followed by
    node indices ``M..M+K-1``.
    """
    if tables is None:
        if max_stage is None:
            raise ValueError("need tables or max_stage")
        tables = build_neighborhood_tables(net, max_stage)
    if max_stage is None:
        max_stage = tables.max_stage
    if max_stage > tables.max_stage:
        raise ValueError("tables were built with a smaller max_stage")
    m, k = net.n_edges, net.n_nodes
    d = m + k

    beta = [np.zeros((d, d)) for _ in range(max_stage)]
    delta = [np.zeros((d, d)) for _ in range(max_stage)]
    gamma = np.zeros((d, d))

    for i in range(k):
        row = m + i
        inc = tables.incident[i]
        if inc:
            gamma[row, list(inc)] = 1.0 / len(inc)
        for r in range(1, max_stage + 1):
            nbr = tables.nodes(i, r)
            if nbr:
                beta[r - 1][row, [m + j for j in nbr]] = 1.0 / len(nbr)
            if inc:
                w_edge = 1.0 / len(inc)
                for e in inc:
                    enb = tables.edges(e, r)
                    if enb:
                        delta[r - 1][row, list(enb)] += w_edge / len(enb)

    for q, (a, b) in enumerate(net.edges):
        gamma[q, [m + a, m + b]] = 0.5
        for r in range(1, max_stage + 1):
            enb = tables.edges(q, r)
            if enb:
                beta[r - 1][q, list(enb)] = 1.0 / len(enb)
            pool = sorted((set(tables.nodes(a, r)) | set(tables.nodes(b, r))) - {a, b})
            if pool:
                delta[r - 1][q, [m + j for j in pool]] = 1.0 / len(pool)

    return SlotWeights(beta=tuple(beta), gamma=gamma, delta=tuple(delta))


def _lag_columns(weights: SlotWeights, ylag: np.ndarray, stages: int) -> list[np.ndarray]:
    """Per-slot transformed state for one lag; each entry is (d, n_t)."""
    cols = [ylag]
    cols.extend(weights.beta[r] @ ylag for r in range(stages))
    cols.append(weights.gamma @ ylag)
    cols.extend(weights.delta[r] @ ylag for r in range(stages))
    return cols


def design_matrix(
    panel: PanelSeries,
    order: ModelOrder,
    weights: SlotWeights | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked least-squares system over all series and usable times.

    Returns ``(X, y)`` where rows run over response times ``t = L..T-1``
    (outer) and stacked series (inner), and columns follow the canonical
    coefficient order.
    """
    L = order.max_lag
    if panel.n_times <= L:
        raise ValueError(
            f"panel has {panel.n_times} time points; need more than max_lag={L}"
        )
    if weights is None:
        weights = slot_weights(panel.network, max_stage=order.max_stage)
    y = panel.stacked()
    d, T = y.shape
    nt = T - L
    cols: list[np.ndarray] = []
    for l in range(1, L + 1):
        ylag = y[:, L - l:T - l]
        for block in _lag_columns(weights, ylag, order.stages[l - 1]):
            cols.append(block.T.ravel())
    X = np.column_stack(cols) if cols else np.empty((nt * d, 0))
    resp = y[:, L:].T.ravel()
    return X, resp


def regressor_row(
    panel: PanelSeries,
    order: ModelOrder,
    kind: str,
    index: int,
    t: int,
    weights: SlotWeights | None = None,
) -> np.ndarray:
    """Design row for one target series at response time ``t`` (0-based).

    ``kind`` is ``"node"`` or ``"edge"``; ``index`` the node index or edge
    position.  Requires ``t >= max_lag``.
    """
    if kind not in ("node", "edge"):
        raise ValueError("kind must be 'node' or 'edge'")
    if t < order.max_lag or t >= panel.n_times:
        raise ValueError(f"response time {t} needs {order.max_lag} <= t < {panel.n_times}")
    if weights is None:
        weights = slot_weights(panel.network, max_stage=order.max_stage)
    m = panel.network.n_edges
    pos = m + index if kind == "node" else index
    if kind == "node" and not (0 <= index < panel.network.n_nodes):
        raise ValueError(f"node index {index} out of range")
    if kind == "edge" and not (0 <= index < m):
        raise ValueError(f"edge index {index} out of range")
    y = panel.stacked()
    parts: list[float] = []
    for l in range(1, order.max_lag + 1):
        ycol = y[:, t - l]
        rr = order.stages[l - 1]
        parts.append(ycol[pos])
        parts.extend(weights.beta[r][pos] @ ycol for r in range(rr))
        parts.append(weights.gamma[pos] @ ycol)
        parts.extend(weights.delta[r][pos] @ ycol for r in range(rr))
    return np.asarray(parts)


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class FitResult:
    """Least-squares estimates plus everything needed to forecast.

    ``param_cov`` is the plug-in covariance ``sigma2 * (X'X)^{-1}``;
    ``training_tail`` holds the last ``max_lag`` stacked state columns of
    the fitting panel, which seed the forecast recursion.
    """

    network: StaticNetwork
    order: ModelOrder
    coefficients: Coefficients
    theta: np.ndarray
    param_cov: np.ndarray
    residual_variance: float
    dof: int
    n_rows: int
    var_matrices: np.ndarray
    training_tail: np.ndarray
    coefficient_names: tuple[str, ...] = field(default=())

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        """Per-coefficient normal confidence intervals, shape (p, 2)."""
        z = _normal_quantile(level)
        se = np.sqrt(np.diag(self.param_cov))
        return np.column_stack([self.theta - z * se, self.theta + z * se])

    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.param_cov))


def fit(
    panel: PanelSeries,
    order: ModelOrder,
    weights: SlotWeights | None = None,
) -> FitResult:
    """Estimate shared coefficients by ordinary least squares.

    The stacked system is solved through a pivoted orthogonal
    decomposition.  A rank-deficient design raises
    :class:`~netpanel.errors.SingularityError` naming the offending
    columns; too few rows for a positive error degree of freedom raises
    ``ValueError``.
    """
    if weights is None:
        weights = slot_weights(panel.network, max_stage=order.max_stage)
    X, y = design_matrix(panel, order, weights)
    n, p = X.shape
    if n - p <= 0:
        raise ValueError(
            f"{n} stacked rows cannot identify {p} coefficients with a "
            f"positive error degree of freedom"
        )
    names = order.coefficient_names()

    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    col_norms = np.linalg.norm(X, axis=0)
    tol = 1e-10 * (col_norms.max() if p else 0.0)
    rdiag = np.abs(np.diag(r))
    bad = np.where(rdiag <= tol)[0]
    if bad.size:
        offending = sorted(names[piv[k]] for k in bad)
        raise SingularityError(offending)

    theta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    theta = np.empty(p)
    theta[piv] = theta_piv

    resid = y - X @ theta
    rss = float(resid @ resid)
    dof = n - p
    sigma2 = rss / dof

    rinv = scipy.linalg.solve_triangular(r, np.eye(p))
    xtx_inv = np.empty((p, p))
    xtx_inv[np.ix_(piv, piv)] = rinv @ rinv.T
    cov = sigma2 * xtx_inv

    coeffs = Coefficients.from_theta(order, theta, sigma2=sigma2)
    mats = to_var(panel.network, coeffs, weights=weights)
    tail = panel.stacked()[:, panel.n_times - order.max_lag:]
    return FitResult(
        network=panel.network,
        order=order,
        coefficients=coeffs,
        theta=theta,
        param_cov=cov,
        residual_variance=sigma2,
        dof=dof,
        n_rows=n,
        var_matrices=mats,
        training_tail=tail.copy(),
        coefficient_names=tuple(names),
    )


# ---------------------------------------------------------------------------
# VAR form, stability, forecasting


def to_var(
    net: StaticNetwork,
    coeffs: Coefficients,
    weights: SlotWeights | None = None,
    literal_nested: bool = False,
) -> np.ndarray:
    """Expand shared coefficients into unrestricted VAR lag matrices.

    Returns an (L, d, d) array over the stacked coordinates.  With
    ``literal_nested`` the node equations use the nested reading in which
    the cross-neighbourhood term is additionally scaled by the cross
    coefficient of the same lag; edge equations are identical either way.
    """
    order = coeffs.order
    if weights is None:
        weights = slot_weights(net, max_stage=order.max_stage)
    m, k = net.n_edges, net.n_nodes
    d = m + k
    mats = np.zeros((order.max_lag, d, d))
    for l in range(order.max_lag):
        a = coeffs.alpha[l] * np.eye(d) + coeffs.gamma[l] * weights.gamma
        for r in range(order.stages[l]):
            a += coeffs.beta[l][r] * weights.beta[r]
            dl = coeffs.delta[l][r]
            if literal_nested:
                wd = weights.delta[r].copy()
                wd[m:, :] *= coeffs.gamma[l]
                a += dl * wd
            else:
                a += dl * weights.delta[r]
        mats[l] = a
    return mats


def companion_matrix(mats: np.ndarray) -> np.ndarray:
    """Block companion form of VAR lag matrices (L, d, d) -> (Ld, Ld)."""
    mats = np.asarray(mats, dtype=float)
    L, d, _ = mats.shape
    comp = np.zeros((L * d, L * d))
    comp[:d] = np.concatenate(list(mats), axis=1)
    if L > 1:
        comp[d:, :-d] = np.eye((L - 1) * d)
    return comp


def spectral_radius(mats: np.ndarray) -> float:
    """Largest eigenvalue modulus of the companion matrix."""
    eig = np.linalg.eigvals(companion_matrix(mats))
    return float(np.max(np.abs(eig))) if eig.size else 0.0


@dataclass(frozen=True)
class Forecast:
    """Point forecasts with per-horizon normal intervals.

    Node arrays are (n_nodes, h) and edge arrays (n_edges, h); column s
    holds the (s+1)-step-ahead values.  Intervals reflect innovation
    uncertainty only — coefficient estimation error is not propagated.
    """

    network: StaticNetwork
    horizon: int
    level: float
    node_point: np.ndarray
    node_lower: np.ndarray
    node_upper: np.ndarray
    edge_point: np.ndarray
    edge_lower: np.ndarray
    edge_upper: np.ndarray

    def stacked_point(self) -> np.ndarray:
        return np.vstack([self.edge_point, self.node_point])


def _psi_weights(mats: np.ndarray, h: int) -> np.ndarray:
    """Moving-average weight matrices Psi_0..Psi_{h-1} of the VAR."""
    L, d, _ = mats.shape
    psi = np.zeros((h, d, d))
    if h == 0:
        return psi
    psi[0] = np.eye(d)
    for s in range(1, h):
        acc = np.zeros((d, d))
        for j in range(1, min(s, L) + 1):
            acc += mats[j - 1] @ psi[s - j]
        psi[s] = acc
    return psi


def forecast(fit_result: FitResult, h: int, level: float = 0.95) -> Forecast:
    """Iterated multi-step forecast from the end of the fitting panel.

    Point forecasts come from running the autoregression forward with
    innovations at zero; the h-step variance accumulates the squared
    moving-average weights scaled by the residual variance.
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    mats = fit_result.var_matrices
    L, d, _ = mats.shape
    hist = [fit_result.training_tail[:, c] for c in range(fit_result.training_tail.shape[1])]
    points = np.empty((d, h))
    for s in range(h):
        nxt = np.zeros(d)
        for j in range(1, L + 1):
            nxt += mats[j - 1] @ hist[-j]
        points[:, s] = nxt
        hist.append(nxt)

    psi = _psi_weights(mats, h)
    var = np.empty((d, h))
    acc = np.zeros(d)
    for s in range(h):
        acc = acc + np.einsum("ij,ij->i", psi[s], psi[s])
        var[:, s] = fit_result.residual_variance * acc
    half = _normal_quantile(level) * np.sqrt(var)

    m = fit_result.network.n_edges
    return Forecast(
        network=fit_result.network,
        horizon=h,
        level=level,
        node_point=points[m:],
        node_lower=points[m:] - half[m:],
        node_upper=points[m:] + half[m:],
        edge_point=points[:m],
        edge_lower=points[:m] - half[:m],
        edge_upper=points[:m] + half[:m],
    )


def model_average(forecasts: Sequence[Forecast], weights: Sequence[float] | None = None) -> Forecast:
    """Combine forecasts: weighted-mean points, union intervals.

    All forecasts must share the network, horizon and level.  Weights
    default to uniform and must be non-negative and sum to one.  The
    combined interval spans from the smallest lower bound to the largest
    upper bound, so it covers every member's interval.
    """
    if not forecasts:
        raise ValueError("need at least one forecast")
    base = forecasts[0]
    for f in forecasts[1:]:
        if f.network.node_labels != base.network.node_labels or f.network.edges != base.network.edges:
            raise ValueError("forecasts disagree on the network")
        if f.horizon != base.horizon or abs(f.level - base.level) > 1e-12:
            raise ValueError("forecasts disagree on horizon or level")
    nf = len(forecasts)
    if weights is None:
        w = np.full(nf, 1.0 / nf)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (nf,):
            raise ValueError(f"need {nf} weights, got shape {w.shape}")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValueError(f"weights sum to {w.sum():.12g}, expected 1")

    def avg(attr):
        return sum(wi * getattr(f, attr) for wi, f in zip(w, forecasts))

    def extremum(attr, fn):
        return fn([getattr(f, attr) for f in forecasts], axis=0)

    return Forecast(
        network=base.network,
        horizon=base.horizon,
        level=base.level,
        node_point=avg("node_point"),
        node_lower=extremum("node_lower", np.min),
        node_upper=extremum("node_upper", np.max),
        edge_point=avg("edge_point"),
        edge_lower=extremum("edge_lower", np.min),
        edge_upper=extremum("edge_upper", np.max),
    )


def binomial_tail(n: int, k: int, p: float) -> float:
    """P(X >= k) for X ~ Binomial(n, p), by direct summation."""
    if not (0 <= k <= n):
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability p={p} outside [0, 1]")
    total = 0.0
    for j in range(k, n + 1):
        total += math.comb(n, j) * p**j * (1.0 - p) ** (n - j)
    return min(total, 1.0)
