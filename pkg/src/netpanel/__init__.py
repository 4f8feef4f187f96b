"""Time-series modelling on the nodes and edges of a fixed directed network.

The package provides:

* a restricted vector autoregression in which every series loads on its own
  past plus stage-wise neighbourhood averages of node and edge series, with
  coefficients shared across the whole network (``netpanel.model``);
* exact simulation of that process together with random-graph generators
  and a replication harness (``netpanel.simulate``);
* univariate ARIMA baselines estimated by conditional least squares and an
  ordinary VAR reference fit (``netpanel.baselines``);
* a monthly nowcasting pipeline — growth rates, network sparsification,
  seasonal decomposition, model fits across a lag/stage grid, model
  averaging and per-industry scoring (``netpanel.nowcast``);
* delimited-file input/output with deterministic formatting
  (``netpanel.fileio``) and a command-line interface (``netpanel.cli``).
"""

from .errors import (
    ConfigError,
    DataError,
    NumericError,
    SingularityError,
    StationarityError,
)
from .graph import (
    NeighborhoodTables,
    StaticNetwork,
    build_neighborhood_tables,
    edge_neighbors,
    incident_edges,
    node_neighbors,
)
from .model import (
    Coefficients,
    FitResult,
    Forecast,
    ModelOrder,
    PanelSeries,
    binomial_tail,
    fit,
    forecast,
    model_average,
    slot_weights,
    spectral_radius,
    to_var,
)
from .nowcast import (
    NowcastReport,
    ReleaseDataset,
    SparsificationConfig,
    deseasonalize,
    industry_summary,
    model_average_release,
    nowcast_release,
    sparsify,
    to_growth,
)
from .simulate import (
    AverageInclusionReport,
    GraphModel,
    SimulationRegime,
    SimulationReport,
    generate_graph,
    model_average_experiment,
    replicate_experiment,
    simulate_panel,
    standard_regime,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "SingularityError",
    "StationarityError",
    "StaticNetwork",
    "NeighborhoodTables",
    "build_neighborhood_tables",
    "node_neighbors",
    "edge_neighbors",
    "incident_edges",
    "ModelOrder",
    "Coefficients",
    "PanelSeries",
    "FitResult",
    "Forecast",
    "slot_weights",
    "fit",
    "forecast",
    "to_var",
    "spectral_radius",
    "model_average",
    "binomial_tail",
    "ReleaseDataset",
    "SparsificationConfig",
    "NowcastReport",
    "to_growth",
    "sparsify",
    "deseasonalize",
    "nowcast_release",
    "model_average_release",
    "industry_summary",
    "GraphModel",
    "SimulationRegime",
    "SimulationReport",
    "AverageInclusionReport",
    "generate_graph",
    "standard_regime",
    "simulate_panel",
    "replicate_experiment",
    "model_average_experiment",
]

__version__ = "0.1.0"
