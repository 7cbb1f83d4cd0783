"""Time-series causal discovery from pooled observational and interventional data.

The package learns lag-windowed partial ancestral graphs with a
constraint-based engine, injects hard interventions through exogenous
context variables, and ships the synthetic-model generator, metrics and
benchmark harness used to validate the approach.
"""

from .data import (
    Dataset,
    InterventionRun,
    PooledDataset,
    default_intervention_value,
    load_csv,
    pool,
    standardize,
    write_csv,
)
from .graph import (
    LaggedEdge,
    Mark,
    TsDag,
    TsPAG,
    ambiguous_edges,
    fully_connected_pag,
    graph_from_json,
    graph_to_json,
    set_mark,
    strip_context,
    to_dot,
)
from .ci import CiQuery, CiResult, DSepOracle, dsep_oracle, parcorr_test, perm_test
from .engine import BackgroundKnowledge, EngineConfig, discover, orient_phase, skeleton_phase
from .pooled import build_meta, discover_obs, run, run_report
from .modelgen import (
    GeneratorConfig,
    Scm,
    random_scm,
    regenerate_equation,
    simulable_scm,
    simulate_intervention,
    simulate_obs,
    true_pag,
)
from .metrics import MetricsReport, bootstrap_ci, score
from .bench import StrategyConfig, run_strategy, select_targets, split_budget
from .estimators import InterventionalFCI, TimeSeriesFCI
from . import robotsim

__version__ = "0.1.0"

__all__ = [
    "BackgroundKnowledge",
    "CiQuery",
    "CiResult",
    "DSepOracle",
    "Dataset",
    "EngineConfig",
    "GeneratorConfig",
    "InterventionRun",
    "InterventionalFCI",
    "LaggedEdge",
    "Mark",
    "MetricsReport",
    "PooledDataset",
    "Scm",
    "StrategyConfig",
    "TimeSeriesFCI",
    "TsDag",
    "TsPAG",
    "ambiguous_edges",
    "bootstrap_ci",
    "build_meta",
    "default_intervention_value",
    "discover",
    "discover_obs",
    "dsep_oracle",
    "fully_connected_pag",
    "graph_from_json",
    "graph_to_json",
    "load_csv",
    "orient_phase",
    "parcorr_test",
    "perm_test",
    "pool",
    "random_scm",
    "regenerate_equation",
    "robotsim",
    "run",
    "run_report",
    "run_strategy",
    "score",
    "select_targets",
    "set_mark",
    "simulable_scm",
    "simulate_intervention",
    "simulate_obs",
    "skeleton_phase",
    "split_budget",
    "standardize",
    "strip_context",
    "to_dot",
    "true_pag",
    "write_csv",
]
