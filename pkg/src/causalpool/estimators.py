"""Scikit-learn style estimators wrapping the discovery pipeline.

Both estimators follow the usual fit/get_params contract so they compose
with model-selection tooling; the learned graph lands in ``graph_``.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .engine import EngineConfig
from .pooled import discover_obs_report, run_report
from .validation import as_dataset, check_interventions


class TimeSeriesFCI(BaseEstimator):
    """Constraint-based PAG discovery from observational time series.

    Parameters
    ----------
    alpha : float
        Significance level of the conditional-independence tests.
    tau_min, tau_max : int
        Lag window of the learned graph.
    max_cond_size : int
        Cap on conditioning-set cardinality during skeleton search.
    max_prelim_iters : int
        Number of orientation-informed skeleton re-sweeps.
    ci_test : str or tester object
        One of ``"parcorr"``, ``"rank"``, ``"perm"`` or any object with a
        ``test(data, query)`` method.
    standardize : bool
        Z-score system columns before testing.

    Attributes
    ----------
    graph_ : TsPAG
        The discovered graph.
    n_ci_tests_ : int
        Number of distinct conditional-independence tests run.
    sepsets_ : dict
        Separating sets recorded during skeleton pruning.
    truncated_slots_ : set
        Surviving edges whose conditioning search hit ``max_cond_size``.
    """

    def __init__(self, alpha=0.05, tau_min=0, tau_max=1, max_cond_size=3,
                 max_prelim_iters=1, ci_test="parcorr", standardize=True):
        self.alpha = alpha
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.max_cond_size = max_cond_size
        self.max_prelim_iters = max_prelim_iters
        self.ci_test = ci_test
        self.standardize = standardize

    def _config(self, tau_min=None) -> EngineConfig:
        return EngineConfig(
            alpha=self.alpha,
            tau_min=self.tau_min if tau_min is None else tau_min,
            tau_max=self.tau_max,
            max_cond_size=self.max_cond_size,
            max_prelim_iters=self.max_prelim_iters,
        )

    def fit(self, X, y=None):
        """Learn a PAG from observational data.

        ``X`` may be a Dataset, a 2-D array (columns become X0, X1, ...) or a
        dataframe with named columns.
        """
        obs = as_dataset(X)
        graph, report = discover_obs_report(
            obs, self._config(), tester=self.ci_test, standardize=self.standardize
        )
        self.graph_ = graph
        self.n_ci_tests_ = report.n_ci_tests
        self.sepsets_ = report.sepsets
        self.truncated_slots_ = report.truncated_slots
        return self


class InterventionalFCI(TimeSeriesFCI):
    """PAG discovery pooling observational data with hard interventions.

    The interface matches :class:`TimeSeriesFCI`; ``fit`` additionally takes
    the intervention runs. ``tau_min`` is forced to zero during fitting
    because context links are instantaneous.

    Attributes
    ----------
    graph_ : TsPAG
        The discovered graph over system variables only.
    meta_graph_ : TsPAG
        The pre-strip graph, context nodes included.
    context_names_ : tuple of str
        Context variables that were appended to the data.
    trace_ : list
        One record per CI test with the regime composition it saw.
    """

    def fit(self, X, y=None, interventions=()):
        obs = as_dataset(X)
        runs = check_interventions(interventions, obs)
        result = run_report(
            obs, runs, self._config(tau_min=0),
            tester=self.ci_test, standardize=self.standardize,
        )
        self.graph_ = result.graph
        self.meta_graph_ = result.meta_graph
        self.context_names_ = result.pooled.context_names
        self.n_ci_tests_ = result.n_ci_tests
        self.sepsets_ = result.sepsets
        self.truncated_slots_ = result.truncated_slots
        self.trace_ = result.trace
        return self
