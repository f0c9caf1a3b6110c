"""Learning-rate sequences eta_1 >= eta_2 >= ... > 0."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Rates above this are legal but numerically extreme; reported as a warning.
ETA_WARNING_THRESHOLD = 50.0


class ScheduleError(ValueError):
    """Raised for malformed schedules or out-of-range queries."""


class ScheduleKind(str, enum.Enum):
    PAPER_SQRT = "paper"
    CBL_SQRT = "cbl"
    CONSTANT = "constant"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LearningRateSchedule:
    """An immutable learning-rate sequence indexed from t = 1.

    Build one with the classmethods rather than the constructor:

    * ``paper_sqrt(N)``: eta_t = sqrt(4 ln N / t)
    * ``cbl_sqrt(N)``: eta_t = sqrt(8 ln N / t), the older textbook choice
    * ``constant(v)``: eta_t = v
    * ``custom(values)``: eta_t = values[t - 1], finite horizon
    """

    kind: ScheduleKind
    constant_value: float | None = None
    custom_values: tuple[float, ...] = field(default=())
    num_experts: int | None = None

    @classmethod
    def paper_sqrt(cls, num_experts: int) -> "LearningRateSchedule":
        return cls._sqrt(ScheduleKind.PAPER_SQRT, num_experts)

    @classmethod
    def cbl_sqrt(cls, num_experts: int) -> "LearningRateSchedule":
        return cls._sqrt(ScheduleKind.CBL_SQRT, num_experts)

    @classmethod
    def _sqrt(cls, kind: ScheduleKind, num_experts: int) -> "LearningRateSchedule":
        if isinstance(num_experts, bool) or not isinstance(num_experts, (int, np.integer)):
            raise ScheduleError(f"number of experts must be an integer, got {num_experts!r}")
        if num_experts < 2:
            # ln 1 = 0 makes every rate zero, which is not a positive rate.
            raise ScheduleError(
                f"{kind.value} schedule needs at least 2 experts (got {num_experts}); "
                "use a constant or custom schedule for a single expert"
            )
        return cls(kind=kind, num_experts=int(num_experts))

    @classmethod
    def constant(cls, value: float) -> "LearningRateSchedule":
        value = float(value)
        if not math.isfinite(value) or value <= 0:
            raise ScheduleError(f"constant learning rate must be positive and finite, got {value}")
        return cls(kind=ScheduleKind.CONSTANT, constant_value=value)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "LearningRateSchedule":
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ScheduleError("custom schedule needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ScheduleError("custom schedule values must be finite")
        # Positivity and monotonicity are left to validate_schedule so callers
        # get the offending index instead of a construction failure.
        return cls(kind=ScheduleKind.CUSTOM, custom_values=vals)

    @property
    def horizon(self) -> int | None:
        """Last index with a defined rate, or None for unbounded schedules."""
        if self.kind is ScheduleKind.CUSTOM:
            return len(self.custom_values)
        return None

    def eta(self, t: int) -> float:
        if t < 1:
            raise ScheduleError(f"rounds are numbered from 1, got t={t}")
        if self.kind is ScheduleKind.PAPER_SQRT:
            return math.sqrt(4.0 * math.log(self.num_experts) / t)
        if self.kind is ScheduleKind.CBL_SQRT:
            return math.sqrt(8.0 * math.log(self.num_experts) / t)
        if self.kind is ScheduleKind.CONSTANT:
            return self.constant_value
        if t > len(self.custom_values):
            raise ScheduleError(
                f"custom schedule defines {len(self.custom_values)} rates, round {t} requested"
            )
        return self.custom_values[t - 1]

    def etas(self, n: int) -> np.ndarray:
        """Rates eta_1..eta_n as an array."""
        if n < 1:
            raise ScheduleError(f"horizon must be >= 1, got {n}")
        if self.kind in (ScheduleKind.PAPER_SQRT, ScheduleKind.CBL_SQRT):
            c = 4.0 if self.kind is ScheduleKind.PAPER_SQRT else 8.0
            t = np.arange(1, n + 1, dtype=np.float64)
            return np.sqrt(c * math.log(self.num_experts) / t)
        if self.kind is ScheduleKind.CONSTANT:
            return np.full(n, self.constant_value)
        if n > len(self.custom_values):
            raise ScheduleError(
                f"custom schedule defines {len(self.custom_values)} rates, horizon {n} requested"
            )
        return np.asarray(self.custom_values[:n], dtype=np.float64)

    def describe(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"constant:{self.constant_value!r}"
        if self.kind is ScheduleKind.CUSTOM:
            return f"custom[{len(self.custom_values)}]"
        return self.kind.value


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    horizon: int
    bad_index: int | None = None
    reason: str = ""
    warnings: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise ScheduleError(self.reason)


def validate_schedule(schedule: LearningRateSchedule, horizon: int) -> ValidationResult:
    """Check eta_t > 0 and eta_t <= eta_{t-1} for every t <= horizon.

    The first offending round (1-based) is reported in ``bad_index``.
    """
    if horizon < 1:
        raise ScheduleError(f"horizon must be >= 1, got {horizon}")
    if schedule.horizon is not None and horizon > schedule.horizon:
        return ValidationResult(
            False,
            horizon,
            schedule.horizon + 1,
            f"custom schedule defines only {schedule.horizon} rates but horizon is {horizon}",
        )
    etas = schedule.etas(horizon)
    nonpos = np.flatnonzero(~(etas > 0))
    increasing = np.flatnonzero(etas[1:] > etas[:-1]) + 1
    candidates = []
    if nonpos.size:
        candidates.append((int(nonpos[0]) + 1, "non-positive learning rate"))
    if increasing.size:
        candidates.append((int(increasing[0]) + 1, "learning rate increases"))
    if candidates:
        idx, what = min(candidates)
        return ValidationResult(
            False, horizon, idx, f"{what} at t={idx} (eta={etas[idx - 1]!r})"
        )
    warnings: tuple[str, ...] = ()
    if etas[0] > ETA_WARNING_THRESHOLD:
        msg = f"eta_1 = {etas[0]:g} exceeds {ETA_WARNING_THRESHOLD:g}; valid but numerically extreme"
        logger.warning(msg)
        warnings = (msg,)
    return ValidationResult(True, horizon, warnings=warnings)
