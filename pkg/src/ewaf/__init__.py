"""Exponentially weighted average forecaster with a time-varying learning rate.

The package runs the forecaster, evaluates its regret bounds, and can
re-derive every intermediate quantity of the regret argument on a live run
so each inequality is certified numerically round by round.
"""

from ewaf.bounds import (
    BoundReport,
    bound_comparison,
    bound_corollary,
    bound_corollary_prior,
    bound_time_varying,
    compare_bounds,
)
from ewaf.environments import (
    ABSOLUTE,
    SQUARED,
    AdaptiveWorstCase,
    ConstantExperts,
    FixedAdvice,
    FixedOutcomes,
    LossFunction,
    RandomWalkExperts,
    StochasticOutcomes,
    convexity_probe,
    eval_loss,
)
from ewaf.forecaster import Forecaster, RoundRecord, compute_weights
from ewaf.ledger import LedgerViolation, ProofLedger, ProofLedgerRow
from ewaf.schedules import LearningRateSchedule, ScheduleError, validate_schedule

__all__ = [
    "ABSOLUTE",
    "SQUARED",
    "AdaptiveWorstCase",
    "BoundReport",
    "ConstantExperts",
    "FixedAdvice",
    "FixedOutcomes",
    "Forecaster",
    "LearningRateSchedule",
    "LedgerViolation",
    "LossFunction",
    "ProofLedger",
    "ProofLedgerRow",
    "RandomWalkExperts",
    "RoundRecord",
    "ScheduleError",
    "StochasticOutcomes",
    "bound_comparison",
    "bound_corollary",
    "bound_corollary_prior",
    "bound_time_varying",
    "compare_bounds",
    "compute_weights",
    "convexity_probe",
    "eval_loss",
    "validate_schedule",
]

__version__ = "0.1.0"
