"""Exception hierarchy shared by the estimation, filtering and optimisation code."""


class MvBayesError(Exception):
    """Base class for all package errors."""


class EstimationError(MvBayesError):
    """Least-squares estimation is degenerate (rank-deficient design, too few rows)."""


class DegenerateFilterError(MvBayesError):
    """The one-step predictive covariance is singular."""


class InfeasibleError(MvBayesError):
    """The mean-variance problem has no proper efficient frontier."""


class DataError(MvBayesError):
    """Malformed input data or configuration."""


class NonStationaryWarning(UserWarning):
    """An estimated autoregression has companion spectral radius >= 1."""
