"""Regret bounds for the time-varying-rate forecaster.

Three upper bounds on L_hat_n - min_i L_{i,n} are exposed:

* ``bound_time_varying``: ln N / eta_n + (1/8) sum_t eta_t
* ``bound_comparison``: (2/eta_n - 1/eta_1) ln N + (1/8) sum_t eta_t, the
  older bound for the same forecaster; never smaller, equal iff eta_1 = eta_n
* ``bound_corollary``: sqrt(n ln N), which dominates the first bound when
  eta_t = sqrt(4 ln N / t)
"""

from __future__ import annotations

import math
import numbers
from dataclasses import asdict, dataclass

from ewaf.schedules import LearningRateSchedule, ScheduleError, ScheduleKind, validate_schedule

IDENTITY_TOL = 1e-12
RUN_TOL = 1e-6


def _check_experts(num_experts) -> int:
    if isinstance(num_experts, bool) or not isinstance(num_experts, numbers.Integral):
        raise ValueError(f"number of experts must be an integer, got {num_experts!r}")
    if num_experts < 1:
        raise ValueError(f"number of experts must be >= 1, got {num_experts}")
    return int(num_experts)


def _rate_terms(schedule: LearningRateSchedule, n: int) -> tuple[float, float, float]:
    """(eta_1, eta_n, sum of eta_1..eta_n) after validating the schedule over n."""
    validate_schedule(schedule, n).raise_if_invalid()
    etas = schedule.etas(n)
    # Direct summation of the actual rates; fsum keeps it correctly rounded.
    return float(etas[0]), float(etas[-1]), math.fsum(etas.tolist())


def bound_time_varying(schedule: LearningRateSchedule, num_experts: int, n: int) -> float:
    num_experts = _check_experts(num_experts)
    _, eta_n, total = _rate_terms(schedule, n)
    return math.log(num_experts) / eta_n + total / 8.0


def bound_comparison(schedule: LearningRateSchedule, num_experts: int, n: int) -> float:
    num_experts = _check_experts(num_experts)
    eta_1, eta_n, total = _rate_terms(schedule, n)
    return (2.0 / eta_n - 1.0 / eta_1) * math.log(num_experts) + total / 8.0


def bound_corollary(num_experts: int, n: int) -> float:
    """sqrt(n ln N); only meaningful for integer N >= 2."""
    num_experts = _check_experts(num_experts)
    if num_experts < 2:
        raise ValueError("the sqrt(n ln N) bound needs N >= 2")
    if n < 1:
        raise ValueError(f"horizon must be >= 1, got {n}")
    return math.sqrt(n * math.log(num_experts))


def bound_corollary_prior(num_experts: int, n: int) -> float:
    """sqrt(2 n ln N) + sqrt(ln N / 8), the guarantee of the sqrt(8 ln N / t) rate."""
    num_experts = _check_experts(num_experts)
    if num_experts < 2:
        raise ValueError("the prior sqrt bound needs N >= 2")
    if n < 1:
        raise ValueError(f"horizon must be >= 1, got {n}")
    ln_n = math.log(num_experts)
    return math.sqrt(2.0 * n * ln_n) + math.sqrt(0.125 * ln_n)


@dataclass(frozen=True)
class BoundReport:
    n: int
    num_experts: int
    schedule: str
    bound_eq1: float
    bound_comparison: float
    bound_corollary: float | None = None
    realized_regret: float | None = None
    violation: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def compare_bounds(
    schedule: LearningRateSchedule,
    num_experts: int,
    n: int,
    realized_regret: float | None = None,
) -> BoundReport:
    tv = bound_time_varying(schedule, num_experts, n)
    cmp_ = bound_comparison(schedule, num_experts, n)
    cor = None
    if schedule.kind is ScheduleKind.PAPER_SQRT:
        cor = bound_corollary(num_experts, n)
    violation = realized_regret is not None and realized_regret > tv + RUN_TOL
    return BoundReport(
        n=n,
        num_experts=num_experts,
        schedule=schedule.describe(),
        bound_eq1=tv,
        bound_comparison=cmp_,
        bound_corollary=cor,
        realized_regret=realized_regret,
        violation=violation,
    )


class PrefixBound:
    """Running value of the time-varying bound at every prefix horizon t.

    O(1) per round: keeps a running sum of the rates seen so far.
    """

    def __init__(self, num_experts: int):
        self.log_n = math.log(_check_experts(num_experts))
        self._sum = 0.0
        self._comp = 0.0

    def push(self, eta: float) -> float:
        if not eta > 0:
            raise ScheduleError(f"learning rate must be positive, got {eta!r}")
        # Neumaier-compensated running sum, so the prefix value tracks fsum.
        s = self._sum + eta
        if abs(self._sum) >= abs(eta):
            self._comp += (self._sum - s) + eta
        else:
            self._comp += (eta - s) + self._sum
        self._sum = s
        return self.log_n / eta + (self._sum + self._comp) / 8.0
