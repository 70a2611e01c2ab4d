"""Exception types shared across the package."""


class FunnelOptError(Exception):
    """Base class for all package errors."""


class BudgetExhausted(FunnelOptError):
    """An uncached black-box evaluation would exceed the active budget."""


class DomainViolation(FunnelOptError):
    """A point outside the variable box was passed to an evaluator."""


class IllConditioned(FunnelOptError):
    """The interpolation matrix is numerically rank deficient."""


class DegenerateBox(FunnelOptError):
    """The variable box leaves no room to place sample points."""


class ProjectionFailure(FunnelOptError):
    """A projection routine did not converge."""


class InfeasibleStationary(FunnelOptError):
    """The iterate is stationary for the violation measure but infeasible."""


class NoFeasibleMinimum(FunnelOptError):
    """No feasible local minimum was found during the global search.

    Parameters
    ----------
    message : str
        Human readable description.
    record : LocalMinimumRecord, optional
        The least infeasible record found, if any.
    """

    def __init__(self, message, record=None, summary=None):
        super().__init__(message)
        self.record = record
        self.summary = summary


class UnknownProblem(FunnelOptError, KeyError):
    """No benchmark registered under the requested name."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown problem"


class UnsupportedMode(FunnelOptError, ValueError):
    """The requested evaluation mode is not available for a problem."""


class ValidationFailure(FunnelOptError):
    """A benchmark reference solution failed validation."""


class ConfigError(FunnelOptError, ValueError):
    """Invalid solver or run configuration."""
