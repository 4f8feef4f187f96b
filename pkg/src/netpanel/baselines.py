"""Univariate ARIMA baselines and an unrestricted VAR reference fit.

ARIMA(p, d, q) models with a constant are estimated by conditional least
squares: the series is differenced ``d`` times, presample residuals are set
to zero, and the sum of squared one-step errors from time ``p`` onward is
minimised.  Pure AR models (q = 0) solve in closed form; models with
moving-average terms use Gauss-Newton with analytically recursed
derivatives.  Everything is vectorised across a whole batch of series at
once — the replication studies fit thousands of small models, and looping
per series would dominate their runtime.

Differencing order for the automatic search is chosen by a stationarity
pretest (a KPSS-type level statistic against its 5% critical value,
differencing until the test stops rejecting, at most twice); ``p`` and
``q`` then minimise AIC over an exhaustive grid at that ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NumericError

_KPSS_CRIT_5PCT = 0.463
_MAX_D = 2
_GRID_MAX_P = 3
_GRID_MAX_Q = 3
_GRID_MAX_PQ = 5
_Z975 = 1.959963984540054


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.d < 0 or self.q < 0:
            raise ValueError(f"ARIMA order must be non-negative, got {self}")

    @property
    def n_params(self) -> int:
        # constant + AR + MA + innovation variance
        return self.p + self.q + 2


@dataclass(frozen=True)
class ArimaFit:
    """Conditional-least-squares estimates for one series.

    ``log_likelihood`` is the Gaussian likelihood at the plug-in variance;
    ``clamped`` flags coefficients rescaled back inside the
    stationarity/invertibility region after the optimiser left it.
    """

    order: ArimaOrder
    intercept: float
    ar: tuple[float, ...]
    ma: tuple[float, ...]
    sigma2: float
    log_likelihood: float
    aic: float
    n_effective: int
    clamped: bool = False


@dataclass(frozen=True)
class SeriesForecast:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


# ---------------------------------------------------------------------------
# batched conditional least squares


def _difference(values: np.ndarray, d: int) -> np.ndarray:
    out = values
    for _ in range(d):
        out = np.diff(out, axis=-1)
    return out


def _batch_ols(X: np.ndarray, resp: np.ndarray):
    """Solve one least-squares problem per series via normal equations.

    ``X`` is (S, rows, k), ``resp`` is (S, rows).  Returns
    (params (S, k), css (S,), ok (S,)); ill-conditioned Gram matrices are
    flagged false and yield zero coefficients.
    """
    k = X.shape[2]
    G = np.einsum("stk,stj->skj", X, X)
    b = np.einsum("stk,st->sk", X, resp)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(G)
    ok = np.isfinite(cond) & (cond < 1e12)
    Gs = np.where(ok[:, None, None], G, np.eye(k))
    params = np.linalg.solve(Gs, np.where(ok[:, None], b, 0.0)[:, :, None])[:, :, 0]
    resid = resp - np.einsum("stk,sk->st", X, params)
    css = np.einsum("st,st->s", resid, resid)
    return params, css, ok


def _css_ar_batch(y: np.ndarray, p: int):
    """Closed-form least squares for ARMA(p, 0) with constant, batched.

    Returns (params (S, 1+p), css (S,), ok (S,)).  ``params[:, 0]`` is the
    constant.  Series whose normal equations are numerically singular come
    back with ``ok`` false.
    """
    S, n = y.shape
    rows = n - p
    X = np.empty((S, rows, 1 + p))
    X[:, :, 0] = 1.0
    for i in range(1, p + 1):
        X[:, :, i] = y[:, p - i:n - i]
    return _batch_ols(X, y[:, p:])


@njit(cache=True)
def _resid_core(y, params, p, q):
    """One-step CSS errors per series, zero before time p; shape (S, n)."""
    S, n = y.shape
    e = np.zeros((S, n))
    for s in range(S):
        for t in range(p, n):
            acc = y[s, t] - params[s, 0]
            for i in range(1, p + 1):
                acc -= params[s, i] * y[s, t - i]
            for j in range(1, q + 1):
                tj = t - j
                if tj >= p:
                    acc -= params[s, p + j] * e[s, tj]
            e[s, t] = acc
    return e


@njit(cache=True)
def _resid_jac_core(y, params, p, q):
    """Residuals and the exact Jacobian de/dparams, shapes (S, n) and
    (S, n, 1+p+q).  Each derivative obeys the same recursion as the
    residual, so one pass over time fills both."""
    S, n = y.shape
    k = 1 + p + q
    e = np.zeros((S, n))
    D = np.zeros((S, n, k))
    for s in range(S):
        for t in range(p, n):
            acc = y[s, t] - params[s, 0]
            D[s, t, 0] = -1.0
            for i in range(1, p + 1):
                acc -= params[s, i] * y[s, t - i]
                D[s, t, i] = -y[s, t - i]
            for j in range(1, q + 1):
                tj = t - j
                if tj >= p:
                    th = params[s, p + j]
                    acc -= th * e[s, tj]
                    D[s, t, p + j] -= e[s, tj]
                    for m in range(k):
                        D[s, t, m] -= th * D[s, tj, m]
            e[s, t] = acc
    return e, D


def _arma_residuals(y: np.ndarray, params: np.ndarray, p: int, q: int) -> np.ndarray:
    """One-step CSS errors, zero before time p; shape (S, n)."""
    return _resid_core(np.ascontiguousarray(y, dtype=np.float64),
                       np.ascontiguousarray(params, dtype=np.float64), p, q)


def _hannan_rissanen_init(y: np.ndarray, p: int, q: int):
    """Starting values from long-autoregression residual proxies.

    A high-order AR fit supplies stand-ins for the unobserved errors, and
    one regression of y on its own lags and the proxy lags gives
    near-optimal coefficients, cutting the Gauss-Newton iteration count.
    Returns (params (S, 1+p+q), ok (S,)) or None when the series are too
    short for the long autoregression.
    """
    S, n = y.shape
    k = 1 + p + q
    h = min(max(8, 2 * (p + q)), (n - 1) // 2)
    start = h + q
    if h < p + 1 or n - start <= k + 2:
        return None
    ar_long, _, ok_long = _css_ar_batch(y, h)
    e = _arma_residuals(y, ar_long, h, 0)
    rows = n - start
    X = np.empty((S, rows, k))
    X[:, :, 0] = 1.0
    for i in range(1, p + 1):
        X[:, :, i] = y[:, start - i:n - i]
    for j in range(1, q + 1):
        X[:, :, p + j] = e[:, start - j:n - j]
    params, _, ok = _batch_ols(X, y[:, start:])
    return params, ok & ok_long


def _arma_css_batch(y: np.ndarray, p: int, q: int, max_iter: int = 200, tol: float = 1e-8):
    """Gauss-Newton conditional least squares for ARMA(p, q) with constant.

    Returns (params (S, 1+p+q), css (S,), converged (S,)).  Iterations
    start from long-autoregression (Hannan-Rissanen) values pulled inside
    the stationary/invertible region, with a plain AR fit as fallback.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    S, n = y.shape
    k = 1 + p + q
    init, _, ok0 = _css_ar_batch(y, p)
    params = np.zeros((S, k))
    params[:, :1 + p] = np.where(ok0[:, None], init, 0.0)
    hr = _hannan_rissanen_init(y, p, q)
    if hr is not None:
        hr_params, hr_ok = hr
        hr_params, _ = _clamp_to_boundary(hr_params, p, q, margin=0.98)
        params = np.where(hr_ok[:, None], hr_params, params)
    converged = np.zeros(S, dtype=bool)

    def css_of(rows, par):
        e = _resid_core(np.ascontiguousarray(rows), np.ascontiguousarray(par), p, q)
        return np.einsum("st,st->s", e, e)

    css = css_of(y, params)
    # iterate only the still-unconverged subset; finished series keep their
    # accepted parameters while stragglers burn the remaining iterations
    active = np.arange(S)
    for _ in range(max_iter):
        ya = y[active]
        pa = params[active]
        e, D = _resid_jac_core(ya, np.ascontiguousarray(pa), p, q)
        grad = np.einsum("st,stk->sk", e, D)
        JtJ = np.einsum("stk,stj->skj", D, D)
        diag = np.einsum("skk->sk", JtJ)
        JtJ = JtJ + (1e-10 * (1.0 + diag.max(axis=1)))[:, None, None] * np.eye(k)
        with np.errstate(all="ignore"):
            try:
                step = -np.linalg.solve(JtJ, grad[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = -np.stack([
                    np.linalg.lstsq(JtJ[s], grad[s], rcond=None)[0]
                    for s in range(active.size)
                ])
        cssa = css[active]
        new_pa = pa + step
        new_css = css_of(ya, new_pa)
        # halve steps that increase the objective
        for _ in range(15):
            worse = new_css > cssa * (1 + 1e-12)
            if not worse.any():
                break
            step[worse] *= 0.5
            new_pa[worse] = pa[worse] + step[worse]
            new_css[worse] = css_of(ya[worse], new_pa[worse])
        scale = 1.0 + np.abs(pa).max(axis=1)
        small_step = np.abs(step).max(axis=1) <= tol * scale
        stalled = np.abs(new_css - cssa) <= 1e-11 * (1.0 + np.abs(cssa))
        accept = new_css <= cssa * (1 + 1e-12)
        params[active] = np.where(accept[:, None], new_pa, pa)
        css[active] = np.where(accept, new_css, cssa)
        done = small_step | stalled
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    return params, css, converged


def _polynomial_radius(coefs: np.ndarray) -> np.ndarray:
    """Companion spectral radius per series for lag polynomials (S, k)."""
    S, k = coefs.shape
    if k == 0:
        return np.zeros(S)
    comp = np.zeros((S, k, k))
    comp[:, 0, :] = coefs
    if k > 1:
        comp[:, 1:, :-1] = np.eye(k - 1)
    with np.errstate(all="ignore"):
        eig = np.linalg.eigvals(comp)
    return np.abs(eig).max(axis=1)


def _clamp_to_boundary(params: np.ndarray, p: int, q: int, margin: float = 0.995):
    """Shrink AR/MA polynomials with unit-circle roots back inside.

    Scaling lag-i coefficients by lambda**i scales every companion
    eigenvalue by lambda, so one rescale lands the radius on ``margin``.
    Returns (params, clamped_mask).
    """
    out = params.copy()
    clamped = np.zeros(params.shape[0], dtype=bool)
    for lo, width in ((1, p), (1 + p, q)):
        if width == 0:
            continue
        rad = _polynomial_radius(out[:, lo:lo + width])
        bad = rad >= 1.0 - 1e-9
        if bad.any():
            lam = np.where(bad, margin / np.maximum(rad, 1e-12), 1.0)
            powers = np.arange(1, width + 1)
            out[:, lo:lo + width] *= lam[:, None] ** powers
            clamped |= bad
    return out, clamped


def _gaussian_ll_aic(css: np.ndarray, n_eff: int, order: ArimaOrder):
    """Concentrated log likelihood and AIC; zero residual variance maps to
    AIC of minus infinity so exact fits dominate the model search."""
    sigma2 = css / n_eff
    ll = np.where(
        sigma2 > 0,
        -0.5 * n_eff * (np.log(2 * np.pi * np.maximum(sigma2, 1e-300)) + 1.0),
        np.inf,
    )
    aic = np.where(np.isfinite(ll), -2.0 * ll + 2.0 * order.n_params, -np.inf)
    return sigma2, ll, aic


def _fit_order_batch(diffed: np.ndarray, order: ArimaOrder):
    """Fit one (p, q) on already-differenced series; returns per-series
    (params, sigma2, ll, aic, ok, clamped)."""
    S, n = diffed.shape
    p, q = order.p, order.q
    if n <= order.n_params:
        bad = np.zeros(S, dtype=bool)
        return (np.zeros((S, 1 + p + q)), np.zeros(S), np.full(S, -np.inf),
                np.full(S, np.inf), bad, bad.copy())
    if q == 0:
        params, css, ok = _css_ar_batch(diffed, p)
    else:
        params, css, ok = _arma_css_batch(diffed, p, q)
    params, clamped = _clamp_to_boundary(params, p, q)
    if clamped.any():
        e = _arma_residuals(diffed, params, p, q)
        css = np.where(clamped, np.einsum("st,st->s", e, e), css)
    n_eff = n - p
    sigma2, ll, aic = _gaussian_ll_aic(css, n_eff, order)
    aic = np.where(ok, aic, np.inf)
    return params, sigma2, ll, aic, ok, clamped


# ---------------------------------------------------------------------------
# stationarity pretest


def kpss_statistic(values: np.ndarray) -> np.ndarray:
    """Level-stationarity statistic per series (rows), Bartlett-weighted
    long-run variance with the usual 4*(n/100)^0.25 lag truncation.

    An exactly constant series has no variance to accumulate and scores 0.
    """
    y = np.atleast_2d(np.asarray(values, dtype=float))
    S, n = y.shape
    if n < 8:
        raise ValueError("stationarity test needs at least 8 observations")
    e = y - y.mean(axis=1, keepdims=True)
    s = np.cumsum(e, axis=1)
    lags = int(4 * (n / 100.0) ** 0.25)
    g0 = np.einsum("st,st->s", e, e) / n
    lrv = g0.copy()
    for k in range(1, lags + 1):
        w = 1.0 - k / (lags + 1.0)
        lrv += 2.0 * w * np.einsum("st,st->s", e[:, k:], e[:, :-k]) / n
    lrv = np.maximum(lrv, 0.0)
    num = np.einsum("st,st->s", s, s) / (n * n)
    with np.errstate(all="ignore"):
        stat = np.where(lrv > 1e-300, num / lrv, 0.0)
    return stat


def select_differencing(values: np.ndarray, max_d: int = _MAX_D) -> np.ndarray:
    """Smallest d (capped) at which each row stops rejecting level
    stationarity at the 5% critical value."""
    y = np.atleast_2d(np.asarray(values, dtype=float))
    S = y.shape[0]
    d = np.zeros(S, dtype=int)
    active = np.arange(S)
    cur = y
    for level in range(max_d):
        if active.size == 0 or cur.shape[1] < 8:
            break
        stat = kpss_statistic(cur[active])
        reject = stat > _KPSS_CRIT_5PCT
        d[active[reject]] = level + 1
        active = active[reject]
        cur = _difference(cur, 1)
    return d


# ---------------------------------------------------------------------------
# public single/batch fitting


def _assemble(order: ArimaOrder, params: np.ndarray, sigma2: float, ll: float,
              aic: float, n_eff: int, clamped: bool) -> ArimaFit:
    p, q = order.p, order.q
    return ArimaFit(
        order=order,
        intercept=float(params[0]),
        ar=tuple(float(v) for v in params[1:1 + p]),
        ma=tuple(float(v) for v in params[1 + p:1 + p + q]),
        sigma2=float(sigma2),
        log_likelihood=float(ll),
        aic=float(aic),
        n_effective=n_eff,
        clamped=bool(clamped),
    )


def arima_fit(series, order: ArimaOrder | tuple[int, int, int]) -> ArimaFit:
    """Fit one ARIMA by conditional least squares.

    Raises ``ValueError`` when the differenced series is too short to
    identify the parameters and :class:`~netpanel.errors.NumericError`
    when the optimiser fails to converge.
    """
    if not isinstance(order, ArimaOrder):
        order = ArimaOrder(*order)
    y = np.asarray(series, dtype=float).reshape(1, -1)
    if y.shape[1] <= order.d:
        raise ValueError("series shorter than the differencing order")
    diffed = _difference(y, order.d)
    if diffed.shape[1] <= order.n_params:
        raise ValueError(
            f"need more than {order.n_params} observations after "
            f"differencing, got {diffed.shape[1]}"
        )
    if order.q == 0:
        params, css, ok = _css_ar_batch(diffed, order.p)
        if not ok[0]:
            raise NumericError(f"singular least-squares system for {order}")
        conv = ok
    else:
        params, css, conv = _arma_css_batch(diffed, order.p, order.q)
        if not conv[0]:
            raise NumericError(f"conditional least squares did not converge for {order}")
    params, clamped = _clamp_to_boundary(params, order.p, order.q)
    if clamped[0]:
        e = _arma_residuals(diffed, params, order.p, order.q)
        css = np.einsum("st,st->s", e, e)
    n_eff = diffed.shape[1] - order.p
    sigma2, ll, aic = _gaussian_ll_aic(css, n_eff, order)
    return _assemble(order, params[0], sigma2[0], ll[0], aic[0], n_eff, clamped[0])


def _grid_orders() -> list[tuple[int, int]]:
    return [
        (p, q)
        for p in range(_GRID_MAX_P + 1)
        for q in range(_GRID_MAX_Q + 1)
        if p + q <= _GRID_MAX_PQ
    ]


def auto_arima_batch(values: np.ndarray) -> list[ArimaFit]:
    """Best-AIC ARIMA per row of ``values``.

    Differencing comes from the stationarity pretest; (p, q) from an
    exhaustive grid search at that d, ties kept by grid order (p outer,
    q inner).  The (0, d, 0) candidate always converges, so every series
    gets a model.
    """
    y = np.atleast_2d(np.asarray(values, dtype=float))
    S, n = y.shape
    if n < 8:
        raise ValueError("need at least 8 observations")
    d_sel = select_differencing(y)
    fits: list[ArimaFit | None] = [None] * S
    for d in np.unique(d_sel):
        rows = np.where(d_sel == d)[0]
        diffed = _difference(y[rows], int(d))
        best_aic = np.full(rows.size, np.inf)
        best: list[ArimaFit | None] = [None] * rows.size
        for p, q in _grid_orders():
            order = ArimaOrder(p, int(d), q)
            params, sigma2, ll, aic, ok, clamped = _fit_order_batch(diffed, order)
            better = aic < best_aic
            for idx in np.where(better)[0]:
                best[idx] = _assemble(order, params[idx], sigma2[idx], ll[idx],
                                      aic[idx], diffed.shape[1] - p, clamped[idx])
            best_aic = np.where(better, aic, best_aic)
        for local, row in enumerate(rows):
            if best[local] is None:
                raise NumericError(f"no ARIMA candidate converged for series {row}")
            fits[row] = best[local]
    return fits  # type: ignore[return-value]


def auto_arima(series) -> ArimaFit:
    """Single-series convenience wrapper around :func:`auto_arima_batch`."""
    return auto_arima_batch(np.asarray(series, dtype=float).reshape(1, -1))[0]


# ---------------------------------------------------------------------------
# forecasting


def _psi_weights_arma(phi: np.ndarray, theta: np.ndarray, h: int) -> np.ndarray:
    psi = np.zeros(h)
    if h == 0:
        return psi
    psi[0] = 1.0
    p, q = len(phi), len(theta)
    for s in range(1, h):
        v = theta[s - 1] if s <= q else 0.0
        for i in range(1, min(s, p) + 1):
            v += phi[i - 1] * psi[s - i]
        psi[s] = v
    return psi


def arima_forecast(fit: ArimaFit, series, h: int, level: float = 0.95) -> SeriesForecast:
    """Iterated forecast with Gaussian intervals.

    ``series`` must be the raw (undifferenced) history the model was fit
    on — residuals are rebuilt by the same zero-presample recursion, the
    differenced-scale forecasts are integrated back ``d`` times, and the
    interval variance accumulates the squared integrated psi-weights.
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    y = np.asarray(series, dtype=float)
    order = fit.order
    p, d, q = order.p, order.d, order.q
    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    w = levels[-1]
    if w.size < max(p, 1):
        raise ValueError("history too short for the fitted order")
    params = np.concatenate([[fit.intercept], fit.ar, fit.ma])
    e = _arma_residuals(w[None, :], params[None, :], p, q)[0]

    hist = list(w)
    resid = list(e)
    fc = np.empty(h)
    for s in range(h):
        acc = fit.intercept
        for i in range(1, p + 1):
            acc += fit.ar[i - 1] * hist[-i]
        for j in range(1, q + 1):
            back = s - j
            if back < 0:
                acc += fit.ma[j - 1] * resid[len(e) + back]
        fc[s] = acc
        hist.append(acc)
        resid.append(0.0)

    psi = _psi_weights_arma(np.asarray(fit.ar), np.asarray(fit.ma), h)
    point = fc
    for depth in range(d, 0, -1):
        point = levels[depth - 1][-1] + np.cumsum(point)
        psi = np.cumsum(psi)
    var = fit.sigma2 * np.cumsum(psi**2)
    if abs(level - 0.95) < 1e-12:
        z = _Z975
    else:
        from scipy.stats import norm

        z = float(norm.ppf(0.5 + level / 2.0))
    half = z * np.sqrt(var)
    return SeriesForecast(point=point, lower=point - half, upper=point + half, level=level)


def rw_drift_fit(series) -> ArimaFit:
    """ARIMA(0,1,0) with constant: the drift is the mean first difference."""
    return arima_fit(series, ArimaOrder(0, 1, 0))


def batch_forecast(fits: list[ArimaFit], values: np.ndarray, h: int,
                   level: float = 0.95) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forecast every row of ``values`` with its own fit; (S, h) arrays."""
    y = np.atleast_2d(np.asarray(values, dtype=float))
    S = y.shape[0]
    point = np.empty((S, h))
    lower = np.empty((S, h))
    upper = np.empty((S, h))
    for s in range(S):
        fc = arima_forecast(fits[s], y[s], h, level)
        point[s], lower[s], upper[s] = fc.point, fc.lower, fc.upper
    return point, lower, upper


# ---------------------------------------------------------------------------
# unrestricted VAR reference


def var_ols_fit(values: np.ndarray, max_lag: int):
    """Equation-by-equation least squares VAR with intercept.

    ``values`` is (n_series, T).  Returns (intercepts (n_series,),
    lag matrices (max_lag, n_series, n_series)).  Used as a dense
    reference point for the restricted network model, which is the same
    regression with tied coefficients and no constant.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 2:
        raise ValueError("values must be 2-D (series by time)")
    ddim, T = y.shape
    L = int(max_lag)
    if L < 1:
        raise ValueError("max_lag must be >= 1")
    if T - L <= L * ddim + 1:
        raise ValueError(
            f"need T - {L} > {L * ddim + 1} rows to fit {ddim} equations"
        )
    rows = T - L
    X = np.empty((rows, 1 + L * ddim))
    X[:, 0] = 1.0
    for l in range(1, L + 1):
        X[:, 1 + (l - 1) * ddim:1 + l * ddim] = y[:, L - l:T - l].T
    resp = y[:, L:].T
    coef, *_ = np.linalg.lstsq(X, resp, rcond=None)
    intercepts = coef[0]
    mats = np.empty((L, ddim, ddim))
    for l in range(L):
        mats[l] = coef[1 + l * ddim:1 + (l + 1) * ddim].T
    return intercepts, mats


def var_ols_forecast(values: np.ndarray, intercepts: np.ndarray,
                     mats: np.ndarray, h: int) -> np.ndarray:
    """Iterated point forecasts from a VAR fit; returns (n_series, h)."""
    y = np.asarray(values, dtype=float)
    L = mats.shape[0]
    hist = [y[:, -l] for l in range(L, 0, -1)]
    out = np.empty((y.shape[0], h))
    for s in range(h):
        nxt = intercepts.copy()
        for l in range(1, L + 1):
            nxt = nxt + mats[l - 1] @ hist[-l]
        out[:, s] = nxt
        hist.append(nxt)
    return out
