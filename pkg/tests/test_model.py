import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netpanel.errors import SingularityError
from netpanel.graph import StaticNetwork, build_neighborhood_tables
from netpanel.model import (
    Coefficients,
    ModelOrder,
    PanelSeries,
    binomial_tail,
    companion_matrix,
    design_matrix,
    fit,
    forecast,
    model_average,
    regressor_row,
    slot_weights,
    spectral_radius,
    to_var,
)

import oracles


def path3():
    return StaticNetwork(("a", "b", "c"), ((0, 1), (1, 2)))


def path3_panel():
    # two columns; response at t=1 uses the t=0 column
    nodes = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])
    edges = np.array([[10.0, 12.0], [20.0, 22.0]])
    return PanelSeries(path3(), nodes, edges, ("t1", "t2"))


class TestModelOrder:
    def test_param_count(self):
        assert ModelOrder(1, (1,)).n_params == 4
        assert ModelOrder(1, (2,)).n_params == 6
        assert ModelOrder(2, (2, 2)).n_params == 12
        assert ModelOrder(1, (0,)).n_params == 2

    def test_names(self):
        assert ModelOrder(1, (1,)).coefficient_names() == [
            "alpha_1", "beta_1_1", "gamma_1", "delta_1_1",
        ]
        names = ModelOrder(2, (2, 0)).coefficient_names()
        assert names == [
            "alpha_1", "beta_1_1", "beta_1_2", "gamma_1", "delta_1_1", "delta_1_2",
            "alpha_2", "gamma_2",
        ]

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelOrder(0, ())
        with pytest.raises(ValueError):
            ModelOrder(2, (1,))
        with pytest.raises(ValueError):
            ModelOrder(1, (-1,))


class TestCoefficients:
    def test_theta_round_trip(self):
        order = ModelOrder(2, (2, 1))
        theta = np.arange(1.0, order.n_params + 1)
        c = Coefficients.from_theta(order, theta)
        assert c.order == order
        np.testing.assert_array_equal(c.to_theta(), theta)

    def test_layout(self):
        c = Coefficients.from_theta(ModelOrder(1, (2,)), [1, 2, 3, 4, 5, 6])
        assert c.alpha == (1.0,)
        assert c.beta == ((2.0, 3.0),)
        assert c.gamma == (4.0,)
        assert c.delta == ((5.0, 6.0),)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Coefficients.from_theta(ModelOrder(1, (1,)), [1.0, 2.0])
        with pytest.raises(ValueError):
            Coefficients((0.1,), ((0.2, 0.3),), (0.4,), ((0.5,),))


class TestRegressorRow:
    def test_node_row_on_path(self):
        # middle node of a->b->c: own past, node-neighbour mean, incident
        # edge mean, incident-average of stage-1 edge-neighbourhood means
        panel = path3_panel()
        row = regressor_row(panel, ModelOrder(1, (1,)), "node", 1, 1)
        np.testing.assert_allclose(row, [2.0, (1 + 3) / 2, (10 + 20) / 2, (20 + 10) / 2])

    def test_end_node_row_on_path(self):
        panel = path3_panel()
        row = regressor_row(panel, ModelOrder(1, (1,)), "node", 0, 1)
        np.testing.assert_allclose(row, [1.0, 2.0, 10.0, 20.0])

    def test_edge_row_on_path(self):
        panel = path3_panel()
        row = regressor_row(panel, ModelOrder(1, (1,)), "edge", 0, 1)
        np.testing.assert_allclose(row, [10.0, 20.0, (1 + 2) / 2, 3.0])

    def test_isolated_node_gets_zeros(self):
        net = StaticNetwork(("a", "b", "c"), ((0, 1),))
        nodes = np.array([[1.0, 0.0], [2.0, 0.0], [7.0, 0.0]])
        edges = np.array([[5.0, 0.0]])
        panel = PanelSeries(net, nodes, edges, ("t1", "t2"))
        row = regressor_row(panel, ModelOrder(1, (1,)), "node", 2, 1)
        np.testing.assert_allclose(row, [7.0, 0.0, 0.0, 0.0])

    def test_two_lags_concatenate(self):
        net = path3()
        nodes = np.array([[1.0, 4.0, 0.0], [2.0, 5.0, 0.0], [3.0, 6.0, 0.0]])
        edges = np.array([[10.0, 12.0, 0.0], [20.0, 22.0, 0.0]])
        panel = PanelSeries(net, nodes, edges, ("t1", "t2", "t3"))
        row = regressor_row(panel, ModelOrder(2, (1, 1)), "node", 1, 2)
        np.testing.assert_allclose(
            row,
            [5.0, (4 + 6) / 2, (12 + 22) / 2, (22 + 12) / 2,
             2.0, (1 + 3) / 2, (10 + 20) / 2, (20 + 10) / 2],
        )

    def test_matches_reference_rows(self):
        rng = np.random.default_rng(7)
        net = StaticNetwork(
            tuple("abcde"), ((0, 1), (1, 2), (2, 0), (3, 2), (1, 3))
        )
        nodes = rng.normal(size=(5, 4))
        edges = rng.normal(size=(5, 4))
        panel = PanelSeries(net, nodes, edges, tuple(f"t{i}" for i in range(4)))
        order = ModelOrder(2, (2, 1))
        for kind, count in (("node", 5), ("edge", 5)):
            for idx in range(count):
                got = regressor_row(panel, order, kind, idx, 3)
                want = oracles.design_row(
                    5, net.edges, order.stages, kind, idx,
                    nodes[:, :3], edges[:, :3],
                )
                np.testing.assert_allclose(got, want, atol=1e-14)


class TestDesignMatrix:
    def test_rows_follow_time_then_series(self):
        panel = path3_panel()
        order = ModelOrder(1, (1,))
        X, y = design_matrix(panel, order)
        assert X.shape == (5, 4)
        # responses: edges then nodes at t=1
        np.testing.assert_allclose(y, [12.0, 22.0, 4.0, 5.0, 6.0])
        np.testing.assert_allclose(X[2], regressor_row(panel, order, "node", 0, 1))
        np.testing.assert_allclose(X[0], regressor_row(panel, order, "edge", 0, 1))

    def test_needs_more_than_lag_columns(self):
        with pytest.raises(ValueError, match="max_lag"):
            design_matrix(path3_panel(), ModelOrder(2, (1, 1)))


class TestToVar:
    def test_pure_own_lag_is_scaled_identity(self):
        net = path3()
        coeffs = Coefficients((0.5,), ((),), (0.0,), ((),))
        mats = to_var(net, coeffs)
        np.testing.assert_allclose(mats[0], 0.5 * np.eye(5))

    def test_one_step_matches_reference_step(self):
        rng = np.random.default_rng(11)
        net = StaticNetwork(
            tuple("abcdef"), ((0, 1), (1, 2), (2, 3), (3, 0), (4, 1), (2, 4))
        )
        order = ModelOrder(2, (2, 2))
        theta = rng.normal(scale=0.2, size=order.n_params)
        coeffs = Coefficients.from_theta(order, theta)
        mats = to_var(net, coeffs)
        gh = rng.normal(size=(6, 2))
        ph = rng.normal(size=(6, 2))
        want_nodes, want_edges = oracles.step_means(
            6, net.edges, coeffs.alpha, coeffs.beta, coeffs.gamma, coeffs.delta,
            gh, ph,
        )
        y1 = np.concatenate([ph[:, -1], gh[:, -1]])
        y2 = np.concatenate([ph[:, -2], gh[:, -2]])
        got = mats[0] @ y1 + mats[1] @ y2
        np.testing.assert_allclose(got[:6], want_edges, atol=1e-12)
        np.testing.assert_allclose(got[6:], want_nodes, atol=1e-12)

    def test_literal_nested_scales_node_cross_terms(self):
        rng = np.random.default_rng(3)
        net = path3()
        order = ModelOrder(1, (1,))
        coeffs = Coefficients.from_theta(order, [0.2, 0.1, 0.3, 0.25])
        mats = to_var(net, coeffs, literal_nested=True)
        gh = rng.normal(size=(3, 1))
        ph = rng.normal(size=(2, 1))
        want_nodes, want_edges = oracles.step_means(
            3, net.edges, coeffs.alpha, coeffs.beta, coeffs.gamma, coeffs.delta,
            gh, ph, literal_nested=True,
        )
        got = mats[0] @ np.concatenate([ph[:, -1], gh[:, -1]])
        np.testing.assert_allclose(got[:2], want_edges, atol=1e-14)
        np.testing.assert_allclose(got[2:], want_nodes, atol=1e-14)


class TestSpectralRadius:
    def test_single_lag_diagonal(self):
        mats = np.array([np.diag([0.5, -0.8])])
        assert spectral_radius(mats) == pytest.approx(0.8)

    def test_two_lag_scalar_known_roots(self):
        # x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: companion eigenvalues solve
        # z^2 - 0.5 z - 0.3 = 0
        mats = np.array([[[0.5]], [[0.3]]])
        roots = np.roots([1.0, -0.5, -0.3])
        assert spectral_radius(mats) == pytest.approx(np.abs(roots).max())

    def test_companion_layout(self):
        mats = np.array([[[0.1, 0.2], [0.0, 0.3]], [[0.4, 0.0], [0.0, 0.5]]])
        comp = companion_matrix(mats)
        assert comp.shape == (4, 4)
        np.testing.assert_allclose(comp[:2, :2], mats[0])
        np.testing.assert_allclose(comp[:2, 2:], mats[1])
        np.testing.assert_allclose(comp[2:, :2], np.eye(2))


def random_panel(seed, n_nodes=5, T=40, extra_edges=3):
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n_nodes) for j in range(n_nodes) if i != j]
    rng.shuffle(pairs)
    chosen = tuple(pairs[: n_nodes - 1 + extra_edges])
    # splice in a spanning-ish path so the graph is not degenerate
    base = tuple((i, i + 1) for i in range(n_nodes - 1))
    edges = tuple(dict.fromkeys(base + chosen))
    net = StaticNetwork(tuple(f"n{i}" for i in range(n_nodes)), edges)
    nodes = rng.normal(size=(n_nodes, T))
    edge_vals = rng.normal(size=(net.n_edges, T))
    return PanelSeries(net, nodes, edge_vals, tuple(f"t{i}" for i in range(T)))


class TestFit:
    def test_matches_normal_equations_oracle(self):
        # independent design construction + dense normal equations
        for seed in range(5):
            panel = random_panel(seed)
            order = ModelOrder(2, (2, 1))
            res = fit(panel, order)
            rows, ys = [], []
            nodes, edges = panel.node_values, panel.edge_values
            for t in range(order.max_lag, panel.n_times):
                for q in range(panel.network.n_edges):
                    rows.append(oracles.design_row(
                        5, panel.network.edges, order.stages, "edge", q,
                        nodes[:, :t], edges[:, :t]))
                    ys.append(edges[q, t])
                for i in range(5):
                    rows.append(oracles.design_row(
                        5, panel.network.edges, order.stages, "node", i,
                        nodes[:, :t], edges[:, :t]))
                    ys.append(nodes[i, t])
            X = np.array(rows)
            yv = np.array(ys)
            theta = np.linalg.solve(X.T @ X, X.T @ yv)
            np.testing.assert_allclose(res.theta, theta, atol=1e-8)
            rss = float(((yv - X @ theta) ** 2).sum())
            dof = X.shape[0] - X.shape[1]
            assert res.dof == dof
            assert res.residual_variance == pytest.approx(rss / dof, rel=1e-8)
            cov = rss / dof * np.linalg.inv(X.T @ X)
            np.testing.assert_allclose(res.param_cov, cov, atol=1e-8)

    def test_row_ordering_invariance_of_estimates(self):
        # fitting on a window should reproduce the same design subset
        panel = random_panel(12, T=30)
        res_full = fit(panel, ModelOrder(1, (1,)))
        res_win = fit(panel.window(30), ModelOrder(1, (1,)))
        np.testing.assert_allclose(res_full.theta, res_win.theta)

    def test_recovers_exact_linear_process(self):
        # noiseless data generated by the model is recovered exactly
        rng = np.random.default_rng(5)
        net = StaticNetwork(tuple("abcd"), ((0, 1), (1, 2), (2, 3), (3, 0), (0, 2)))
        order = ModelOrder(1, (1,))
        coeffs = Coefficients.from_theta(order, [0.3, 0.2, 0.1, -0.2])
        mats = to_var(net, coeffs)
        d = 9
        y = np.empty((d, 30))
        y[:, 0] = rng.normal(size=d)
        for t in range(1, 30):
            y[:, t] = mats[0] @ y[:, t - 1]
        panel = PanelSeries.from_stacked(net, y, tuple(f"t{i}" for i in range(30)))
        res = fit(panel, order)
        np.testing.assert_allclose(res.theta, coeffs.to_theta(), atol=1e-8)
        assert res.residual_variance < 1e-16

    def test_zero_panel_is_singular_with_names(self):
        net = path3()
        panel = PanelSeries(net, np.zeros((3, 10)), np.zeros((2, 10)),
                            tuple(f"t{i}" for i in range(10)))
        with pytest.raises(SingularityError) as exc:
            fit(panel, ModelOrder(1, (1,)))
        assert set(exc.value.columns) == {"alpha_1", "beta_1_1", "gamma_1", "delta_1_1"}

    def test_insufficient_rows_raises(self):
        panel = path3_panel()  # 5 rows, 4 params -> dof 1, fine
        fit(panel, ModelOrder(1, (1,)))
        with pytest.raises(ValueError, match="degree of freedom"):
            fit(panel, ModelOrder(1, (2,)))  # 5 rows, 6 params

    def test_conf_int_uses_normal_quantile(self):
        panel = random_panel(3)
        res = fit(panel, ModelOrder(1, (1,)))
        ci = res.conf_int(0.95)
        se = res.std_errors()
        np.testing.assert_allclose(ci[:, 0], res.theta - 1.959963984540054 * se)
        np.testing.assert_allclose(ci[:, 1], res.theta + 1.959963984540054 * se)


class TestForecast:
    def test_pure_own_lag_closed_form(self):
        # alpha-only dynamics: h-step point is alpha^h times the last value,
        # h-step variance is sigma2 * sum_{s<h} alpha^(2s)
        panel = random_panel(9)
        order = ModelOrder(1, (0,))
        res = fit(panel, order)
        a = res.coefficients.alpha[0]
        g = res.coefficients.gamma[0]
        # force a clean alpha-only model for the closed form
        clean = Coefficients.from_theta(order, [a, 0.0])
        mats = to_var(panel.network, clean)
        object.__setattr__(res, "var_matrices", mats)
        fc = forecast(res, 3)
        last = panel.stacked()[:, -1]
        m = panel.network.n_edges
        for h in range(1, 4):
            np.testing.assert_allclose(fc.node_point[:, h - 1], a**h * last[m:])
            var = res.residual_variance * sum(a ** (2 * s) for s in range(h))
            width = 2 * 1.959963984540054 * np.sqrt(var)
            np.testing.assert_allclose(
                fc.node_upper[:, h - 1] - fc.node_lower[:, h - 1],
                np.full(panel.network.n_nodes, width),
            )
        assert g == res.coefficients.gamma[0]  # gamma untouched by the swap

    def test_psi_weights_match_companion_powers(self):
        rng = np.random.default_rng(21)
        panel = random_panel(21, T=60)
        res = fit(panel, ModelOrder(2, (1, 1)))
        mats = res.var_matrices
        d = mats.shape[1]
        comp = companion_matrix(mats)
        sel = np.zeros((d, 2 * d))
        sel[:, :d] = np.eye(d)
        fc = forecast(res, 4)
        acc = np.zeros(d)
        power = np.eye(2 * d)
        for h in range(1, 5):
            psi = sel @ power @ sel.T
            acc = acc + np.einsum("ij,ij->i", psi, psi)
            var = res.residual_variance * acc
            width = 2 * 1.959963984540054 * np.sqrt(var)
            m = panel.network.n_edges
            np.testing.assert_allclose(
                fc.node_upper[:, h - 1] - fc.node_lower[:, h - 1], width[m:],
                rtol=1e-10)
            power = power @ comp
        assert rng is not None

    def test_interval_width_nondecreasing(self):
        panel = random_panel(2, T=50)
        res = fit(panel, ModelOrder(2, (1, 1)))
        fc = forecast(res, 6)
        widths = fc.node_upper - fc.node_lower
        assert (np.diff(widths, axis=1) >= -1e-12).all()

    def test_iterates_the_recursion(self):
        panel = random_panel(4, T=50)
        res = fit(panel, ModelOrder(2, (1, 1)))
        fc = forecast(res, 3)
        mats = res.var_matrices
        y = panel.stacked()
        h1 = mats[0] @ y[:, -1] + mats[1] @ y[:, -2]
        h2 = mats[0] @ h1 + mats[1] @ y[:, -1]
        h3 = mats[0] @ h2 + mats[1] @ h1
        m = panel.network.n_edges
        np.testing.assert_allclose(fc.stacked_point()[:, 0], h1, atol=1e-12)
        np.testing.assert_allclose(fc.stacked_point()[:, 1], h2, atol=1e-12)
        np.testing.assert_allclose(fc.stacked_point()[:, 2], h3, atol=1e-12)
        assert fc.node_point.shape == (5, 3)
        assert fc.edge_point.shape == (m, 3)

    def test_point_inside_interval(self):
        panel = random_panel(6)
        res = fit(panel, ModelOrder(1, (1,)))
        fc = forecast(res, 4)
        assert (fc.node_lower <= fc.node_point).all()
        assert (fc.node_point <= fc.node_upper).all()
        assert (fc.edge_lower <= fc.edge_point).all()
        assert (fc.edge_point <= fc.edge_upper).all()


class TestModelAverage:
    def _two_forecasts(self):
        panel = random_panel(8, T=60)
        f1 = forecast(fit(panel, ModelOrder(1, (1,))), 2)
        f2 = forecast(fit(panel, ModelOrder(2, (1, 1))), 2)
        return f1, f2

    def test_uniform_mean_and_union(self):
        f1, f2 = self._two_forecasts()
        avg = model_average([f1, f2])
        np.testing.assert_allclose(avg.node_point, (f1.node_point + f2.node_point) / 2)
        np.testing.assert_allclose(avg.node_lower, np.minimum(f1.node_lower, f2.node_lower))
        np.testing.assert_allclose(avg.node_upper, np.maximum(f1.node_upper, f2.node_upper))
        np.testing.assert_allclose(avg.edge_lower, np.minimum(f1.edge_lower, f2.edge_lower))

    def test_union_covers_members(self):
        f1, f2 = self._two_forecasts()
        avg = model_average([f1, f2])
        assert (avg.node_lower <= np.minimum(f1.node_lower, f2.node_lower) + 1e-15).all()
        assert (avg.node_upper >= np.maximum(f1.node_upper, f2.node_upper) - 1e-15).all()
        assert (avg.node_lower <= avg.node_point).all()
        assert (avg.node_point <= avg.node_upper).all()

    def test_explicit_weights(self):
        f1, f2 = self._two_forecasts()
        avg = model_average([f1, f2], [0.25, 0.75])
        np.testing.assert_allclose(avg.node_point, 0.25 * f1.node_point + 0.75 * f2.node_point)

    def test_weight_validation(self):
        f1, f2 = self._two_forecasts()
        with pytest.raises(ValueError, match="sum"):
            model_average([f1, f2], [0.5, 0.6])
        with pytest.raises(ValueError, match="non-negative"):
            model_average([f1, f2], [-0.2, 1.2])
        with pytest.raises(ValueError, match="weights"):
            model_average([f1, f2], [1.0])

    def test_mismatched_horizon_rejected(self):
        panel = random_panel(8, T=60)
        f1 = forecast(fit(panel, ModelOrder(1, (1,))), 2)
        f3 = forecast(fit(panel, ModelOrder(1, (1,))), 3)
        with pytest.raises(ValueError, match="horizon"):
            model_average([f1, f3])


class TestBinomialTail:
    def test_reference_values(self):
        assert binomial_tail(20, 17, 0.95) == pytest.approx(0.9841, abs=1e-4)
        assert binomial_tail(20, 18, 0.95) == pytest.approx(0.9245, abs=1e-4)
        assert binomial_tail(20, 19, 0.95) == pytest.approx(0.7358, abs=1e-4)
        # all-twenty case: exact value is 0.95^20 = 0.3585
        assert binomial_tail(20, 20, 0.95) == pytest.approx(0.95**20, abs=1e-12)
        assert binomial_tail(20, 20, 0.95) == pytest.approx(0.3585, abs=1e-4)

    def test_edge_cases(self):
        assert binomial_tail(5, 0, 0.3) == pytest.approx(1.0)
        assert binomial_tail(5, 5, 1.0) == pytest.approx(1.0)
        assert binomial_tail(5, 5, 0.0) == pytest.approx(0.0)
        with pytest.raises(ValueError):
            binomial_tail(5, 6, 0.5)
        with pytest.raises(ValueError):
            binomial_tail(5, 1, 1.5)


class TestPanelSeries:
    def test_shape_validation(self):
        net = path3()
        with pytest.raises(ValueError, match="node_values"):
            PanelSeries(net, np.zeros((2, 4)), np.zeros((2, 4)), ("a",) * 4)
        with pytest.raises(ValueError, match="edge_values"):
            PanelSeries(net, np.zeros((3, 4)), np.zeros((1, 4)), ("a",) * 4)
        with pytest.raises(ValueError, match="non-finite"):
            PanelSeries(net, np.full((3, 2), np.nan), np.zeros((2, 2)), ("a", "b"))

    def test_stacked_order_edges_first(self):
        panel = path3_panel()
        y = panel.stacked()
        np.testing.assert_array_equal(y[:2], panel.edge_values)
        np.testing.assert_array_equal(y[2:], panel.node_values)

    def test_from_stacked_round_trip(self):
        panel = path3_panel()
        back = PanelSeries.from_stacked(panel.network, panel.stacked(), panel.time_index)
        np.testing.assert_array_equal(back.node_values, panel.node_values)
        np.testing.assert_array_equal(back.edge_values, panel.edge_values)

    def test_arrays_read_only(self):
        panel = path3_panel()
        with pytest.raises(ValueError):
            panel.node_values[0, 0] = 99.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_var_expansion_agrees_with_reference_everywhere(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    take = int(rng.integers(1, len(pairs) + 1))
    idx = rng.choice(len(pairs), size=take, replace=False)
    edges = tuple(pairs[i] for i in sorted(idx))
    net = StaticNetwork(tuple(f"n{i}" for i in range(n)), edges)
    L = int(rng.integers(1, 3))
    stages = tuple(int(rng.integers(0, 3)) for _ in range(L))
    order = ModelOrder(L, stages)
    coeffs = Coefficients.from_theta(order, rng.normal(scale=0.3, size=order.n_params))
    mats = to_var(net, coeffs)
    gh = rng.normal(size=(n, L))
    ph = rng.normal(size=(len(edges), L))
    want_nodes, want_edges = oracles.step_means(
        n, edges, coeffs.alpha, coeffs.beta, coeffs.gamma, coeffs.delta, gh, ph)
    got = np.zeros(len(edges) + n)
    for l in range(1, L + 1):
        got += mats[l - 1] @ np.concatenate([ph[:, -l], gh[:, -l]])
    np.testing.assert_allclose(got[: len(edges)], want_edges, atol=1e-12)
    np.testing.assert_allclose(got[len(edges):], want_nodes, atol=1e-12)
