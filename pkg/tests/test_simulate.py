import numpy as np
import pytest

from netpanel.errors import NumericError, StationarityError
from netpanel.graph import StaticNetwork
from netpanel.model import Coefficients, ModelOrder, spectral_radius, to_var
from netpanel.simulate import (
    AverageInclusionReport,
    GraphModel,
    SimulationRegime,
    _rdp_density,
    expected_density,
    generate_graph,
    model_average_experiment,
    replicate_experiment,
    simulate_panel,
    standard_regime,
)

import oracles


class TestGraphModelCalibration:
    @pytest.mark.parametrize("density", [0.2, 0.4, 0.6])
    def test_er_density_exact(self, density):
        m = GraphModel.erdos_renyi(20, density)
        assert abs(expected_density(m) - density) < 1e-12

    @pytest.mark.parametrize("density", [0.2, 0.4])
    @pytest.mark.parametrize("n", [20, 21])
    def test_sbm_density_analytic(self, density, n):
        m = GraphModel.stochastic_block(n, density)
        assert m.within_prob == pytest.approx(2.0 * m.between_prob)
        assert abs(expected_density(m) - density) < 1e-9

    @pytest.mark.parametrize("density", [0.2, 0.4, 0.6])
    def test_rdp_density_solved(self, density):
        m = GraphModel.random_dot_product(20, density)
        assert abs(expected_density(m) - density) < 1e-6

    def test_rdp_scale_accounts_for_clamping(self):
        # without the clamp the scale would solve s^2/2 = density exactly;
        # clamping at 1 forces a larger scale
        m = GraphModel.random_dot_product(20, 0.4)
        naive = np.sqrt(2 * 0.4)
        assert m.latent_scale > naive

    def test_rdp_expectation_matches_monte_carlo(self):
        m = GraphModel.random_dot_product(20, 0.4)
        rng = np.random.default_rng(0)
        u = rng.random((400_000, 2)) * m.latent_scale
        v = rng.random((400_000, 2)) * m.latent_scale
        emp = np.minimum((u * v).sum(axis=1), 1.0).mean()
        assert emp == pytest.approx(0.4, abs=3e-3)
        assert _rdp_density(m.latent_scale) == pytest.approx(emp, abs=3e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            GraphModel.erdos_renyi(20, 0.0)
        with pytest.raises(ValueError):
            GraphModel.erdos_renyi(1, 0.4)
        with pytest.raises(ValueError):
            GraphModel.stochastic_block(20, 0.9, within_between_ratio=5.0)
        with pytest.raises(ValueError):
            GraphModel("bad", 20, 0.4)

    @pytest.mark.parametrize("make", [
        GraphModel.erdos_renyi,
        GraphModel.stochastic_block,
        GraphModel.random_dot_product,
    ])
    def test_empirical_density_near_target(self, make):
        model = make(40, 0.4)
        dens = []
        for seed in range(60):
            net = generate_graph(model, seed)
            dens.append(net.n_edges / (40 * 39))
        assert np.mean(dens) == pytest.approx(0.4, abs=0.02)


class TestGenerateGraph:
    def test_deterministic_per_seed(self):
        model = GraphModel.erdos_renyi(12, 0.3)
        a = generate_graph(model, 5)
        b = generate_graph(model, 5)
        c = generate_graph(model, 6)
        assert a.edges == b.edges
        assert a.edges != c.edges

    def test_labels_zero_padded_row_major(self):
        net = generate_graph(GraphModel.erdos_renyi(12, 0.5), 1)
        assert net.node_labels[0] == "n01"
        assert net.node_labels[11] == "n12"
        pairs = list(net.edges)
        assert pairs == sorted(pairs)

    def test_impossible_density_raises_after_retries(self):
        model = GraphModel.erdos_renyi(2, 1e-9)
        with pytest.raises(NumericError, match="10 draws"):
            generate_graph(model, 0)

    def test_sbm_blocks_denser_within(self):
        model = GraphModel.stochastic_block(40, 0.4)
        within = between = 0
        for seed in range(30):
            net = generate_graph(model, seed)
            for a, b in net.edges:
                if (a < 20) == (b < 20):
                    within += 1
                else:
                    between += 1
        # within-pair count equals between-pair count here, so edges should
        # land within blocks about twice as often
        assert within / between == pytest.approx(2.0, rel=0.15)


class TestStandardRegimes:
    def test_regime1_coefficients(self):
        r = standard_regime(1, GraphModel.erdos_renyi(20, 0.4))
        assert r.order == ModelOrder(1, (1,))
        assert r.coefficients.alpha == (0.2,)
        assert r.coefficients.beta == ((0.2,),)
        assert r.coefficients.gamma == (0.3,)
        assert r.coefficients.delta == ((0.2,),)
        assert r.noise_sd == 0.1
        assert r.n_times == 200
        assert r.burn_in == 50

    def test_regime2_coefficients(self):
        r = standard_regime(2, GraphModel.erdos_renyi(20, 0.4))
        assert r.order == ModelOrder(1, (2,))
        np.testing.assert_allclose(
            r.coefficients.to_theta(), [0.2, -0.2, 0.1, 0.1, 0.05, -0.2])

    def test_regime3_coefficients(self):
        r = standard_regime(3, GraphModel.erdos_renyi(20, 0.4))
        assert r.order == ModelOrder(2, (2, 2))
        np.testing.assert_allclose(
            r.coefficients.to_theta(),
            [-0.1, 0.1, -0.2, 0.01, 0.02, -0.01,
             0.3, -0.02, 0.03, 0.01, -0.02, 0.01])

    @pytest.mark.parametrize("index", [1, 2, 3])
    def test_all_regimes_stationary_on_sample_graphs(self, index):
        for maker in (GraphModel.erdos_renyi, GraphModel.stochastic_block,
                      GraphModel.random_dot_product):
            model = maker(20, 0.4)
            regime = standard_regime(index, model)
            net = generate_graph(model, 17)
            mats = to_var(net, regime.coefficients)
            assert spectral_radius(mats) < 1.0

    def test_unknown_index(self):
        with pytest.raises(ValueError):
            standard_regime(4, GraphModel.erdos_renyi(20, 0.4))


class TestSimulatePanel:
    def _tiny_regime(self, index=1, n=5, T=30):
        model = GraphModel.erdos_renyi(n, 0.5)
        return standard_regime(index, model, n_times=T, burn_in=12)

    def test_shapes_and_labels(self):
        regime = self._tiny_regime()
        net = generate_graph(regime.graph_model, 3)
        panel = simulate_panel(net, regime, 4)
        assert panel.node_values.shape == (5, 30)
        assert panel.edge_values.shape == (net.n_edges, 30)
        assert panel.time_index[0] == "t0001"
        assert panel.time_index[-1] == "t0030"

    def test_deterministic_per_seed(self):
        regime = self._tiny_regime()
        net = generate_graph(regime.graph_model, 3)
        a = simulate_panel(net, regime, 9)
        b = simulate_panel(net, regime, 9)
        c = simulate_panel(net, regime, 10)
        np.testing.assert_array_equal(a.node_values, b.node_values)
        assert not np.array_equal(a.node_values, c.node_values)

    @pytest.mark.parametrize("index", [1, 2, 3])
    def test_matches_reference_recursion(self, index):
        # the vectorised simulator must agree with explicit per-equation
        # loops over the neighbourhood sets, innovation for innovation
        regime = self._tiny_regime(index, n=5, T=12)
        net = generate_graph(regime.graph_model, 21)
        panel = simulate_panel(net, regime, 77)
        d = net.n_edges + net.n_nodes
        total = regime.burn_in + regime.n_times
        eps = np.random.default_rng(77).normal(0.0, regime.noise_sd, size=(d, total))
        c = regime.coefficients
        nodes, edges = oracles.simulate_reference(
            5, net.edges, c.alpha, c.beta, c.gamma, c.delta, eps, regime.burn_in)
        np.testing.assert_allclose(panel.node_values, nodes, atol=1e-12)
        np.testing.assert_allclose(panel.edge_values, edges, atol=1e-12)

    def test_literal_nested_matches_reference(self):
        regime = self._tiny_regime(1, n=5, T=10)
        net = generate_graph(regime.graph_model, 2)
        panel = simulate_panel(net, regime, 8, literal_nested=True)
        d = net.n_edges + net.n_nodes
        total = regime.burn_in + regime.n_times
        eps = np.random.default_rng(8).normal(0.0, regime.noise_sd, size=(d, total))
        c = regime.coefficients
        nodes, edges = oracles.simulate_reference(
            5, net.edges, c.alpha, c.beta, c.gamma, c.delta, eps,
            regime.burn_in, literal_nested=True)
        np.testing.assert_allclose(panel.node_values, nodes, atol=1e-12)
        np.testing.assert_allclose(panel.edge_values, edges, atol=1e-12)

    def test_literal_and_linear_differ(self):
        regime = self._tiny_regime(1, n=5, T=10)
        net = generate_graph(regime.graph_model, 2)
        lin = simulate_panel(net, regime, 8)
        lit = simulate_panel(net, regime, 8, literal_nested=True)
        assert not np.allclose(lin.node_values, lit.node_values)

    def test_explosive_regime_rejected(self):
        net = generate_graph(GraphModel.erdos_renyi(5, 0.5), 1)
        coeffs = Coefficients.from_theta(ModelOrder(1, (1,)), [1.1, 0.2, 0.1, 0.1])
        regime = SimulationRegime(coeffs, GraphModel.erdos_renyi(5, 0.5),
                                  n_times=20, burn_in=5)
        with pytest.raises(StationarityError) as exc:
            simulate_panel(net, regime, 0)
        assert exc.value.radius >= 1.0


class TestReplicateExperiment:
    def _fast_regime(self):
        model = GraphModel.erdos_renyi(6, 0.5)
        return standard_regime(1, model, n_times=40, burn_in=10)

    def test_report_structure(self):
        report = replicate_experiment(self._fast_regime(), 3, master_seed=1)
        assert report.n_successful == 3
        assert report.failures == ()
        assert report.coefficient_names == ("alpha_1", "beta_1_1", "gamma_1", "delta_1_1")
        assert report.estimates.shape == (3, 4)
        rows = report.coefficient_rows()
        assert [r["coefficient"] for r in rows] == list(report.coefficient_names)
        assert rows[0]["true_value"] == 0.2
        models = {r["model"] for r in report.prediction_rows()}
        assert models == {"netar", "netar_stage0", "arima_auto", "arima_010"}
        assert len(report.prediction_rows()) == 12

    def test_deterministic(self):
        a = replicate_experiment(self._fast_regime(), 2, master_seed=5,
                                 include_baselines=False)
        b = replicate_experiment(self._fast_regime(), 2, master_seed=5,
                                 include_baselines=False)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        assert a.prediction_records == b.prediction_records

    def test_parallel_matches_serial(self):
        a = replicate_experiment(self._fast_regime(), 3, master_seed=5, jobs=1)
        b = replicate_experiment(self._fast_regime(), 3, master_seed=5, jobs=2)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        assert a.prediction_records == b.prediction_records

    def test_seed_changes_draws(self):
        a = replicate_experiment(self._fast_regime(), 2, master_seed=5,
                                 include_baselines=False)
        b = replicate_experiment(self._fast_regime(), 2, master_seed=6,
                                 include_baselines=False)
        assert not np.array_equal(a.estimates, b.estimates)

    def test_coefficients_roughly_recovered(self):
        report = replicate_experiment(self._fast_regime(), 6, master_seed=2,
                                      include_baselines=False)
        rmse = report.coefficient_rmse()
        assert (rmse < 0.5).all()

    def test_all_failures_raise(self):
        coeffs = Coefficients.from_theta(ModelOrder(1, (1,)), [1.2, 0.0, 0.0, 0.0])
        regime = SimulationRegime(coeffs, GraphModel.erdos_renyi(6, 0.5),
                                  n_times=30, burn_in=5)
        with pytest.raises(NumericError, match="every replication failed"):
            replicate_experiment(regime, 2, master_seed=1)

    def test_median_prediction_rmse(self):
        report = replicate_experiment(self._fast_regime(), 3, master_seed=9)
        med = report.median_prediction_rmse("netar")
        vals = sorted(r["prediction_rmse_all"] for r in report.prediction_rows()
                      if r["model"] == "netar")
        assert med == vals[1]


class TestModelAverageExperiment:
    def test_smoke_and_bounds(self):
        model = GraphModel.erdos_renyi(8, 0.5)
        regime = standard_regime(1, model, n_times=60, burn_in=10)
        report = model_average_experiment(regime, 3, master_seed=3,
                                          lags=(1, 2), stage=1)
        assert isinstance(report, AverageInclusionReport)
        assert report.n_successful == 3
        assert ((0 <= report.inclusion_counts)
                & (report.inclusion_counts <= 8)).all()
        dist = report.inclusion_distribution()
        assert sum(r["proportion"] for r in dist) == pytest.approx(1.0)
        models = {r["model"] for r in report.rmse_rows()}
        assert models == {"lag1", "lag2", "average"}

    def test_interval_pooling_catches_most_nodes(self):
        model = GraphModel.erdos_renyi(10, 0.4)
        regime = standard_regime(1, model, n_times=120, burn_in=20)
        report = model_average_experiment(regime, 4, master_seed=11,
                                          lags=(1, 2, 3), stage=1)
        # pooled intervals are at least as wide as each member's, so
        # inclusion should sit at or above the nominal level on average
        assert report.inclusion_counts.mean() >= 0.85 * 10
