"""Bayesian-updated multi-period mean-variance portfolio selection with uncertain exit time."""

__version__ = "0.1.0"

from mvbayes._core import BACKEND
from mvbayes.bayes_filter import FilterState, Predictive, filter_series, init_filter, predict, update
from mvbayes.errors import (
    DataError,
    DegenerateFilterError,
    EstimationError,
    InfeasibleError,
    MvBayesError,
    NonStationaryWarning,
)
from mvbayes.mv_optimizer import (
    DpCoefficients,
    ExcessMoments,
    ExitDistribution,
    FrontierPoint,
    Policy,
    dp_coefficients,
    expected_terminal_wealth,
    frontier,
    frontier_expectation,
    frontier_variance,
    min_variance_point,
    optimal_policy,
    planning_moments,
    simulate_policy,
)
from mvbayes.returns_model import ArModel, VarModel, fit_ols, forecast_moments, select_order, simulate_path

__all__ = [
    "__version__",
    "BACKEND",
    "ArModel",
    "VarModel",
    "fit_ols",
    "select_order",
    "forecast_moments",
    "simulate_path",
    "FilterState",
    "Predictive",
    "init_filter",
    "predict",
    "update",
    "filter_series",
    "ExitDistribution",
    "ExcessMoments",
    "DpCoefficients",
    "Policy",
    "FrontierPoint",
    "planning_moments",
    "dp_coefficients",
    "expected_terminal_wealth",
    "optimal_policy",
    "min_variance_point",
    "frontier",
    "frontier_variance",
    "frontier_expectation",
    "simulate_policy",
    "MvBayesError",
    "EstimationError",
    "DegenerateFilterError",
    "InfeasibleError",
    "DataError",
    "NonStationaryWarning",
]
