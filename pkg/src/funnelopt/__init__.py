"""Derivative-free global optimization of constrained grey-box problems.

MLSL multistart around a trust-funnel SQP local search on polynomial
interpolation models.
"""

from .errors import (BudgetExhausted, ConfigError, DomainViolation, FunnelOptError,
                     IllConditioned, InfeasibleStationary, NoFeasibleMinimum, UnknownProblem,
                     UnsupportedMode, ValidationFailure)
from .funnel import FunnelParams, LocalMinimumRecord, local_search
from .mlsl import MultistartConfig, MultistartSummary, critical_radius, global_search
from .problem import (BLACK_BOX, WHITE_BOX, EvaluationLedger, GreyBoxProblem,
                      constraint_violation, merit_phi)

__version__ = "0.1.0"

__all__ = ["BLACK_BOX", "WHITE_BOX", "BudgetExhausted", "ConfigError", "DomainViolation",
           "EvaluationLedger", "FunnelOptError", "FunnelParams", "GreyBoxProblem",
           "IllConditioned", "InfeasibleStationary", "LocalMinimumRecord", "MultistartConfig",
           "MultistartSummary", "NoFeasibleMinimum", "UnknownProblem", "UnsupportedMode",
           "ValidationFailure", "constraint_violation", "critical_radius", "global_search",
           "local_search", "merit_phi"]
