"""The exponentially weighted average forecaster with time-varying rate.

At round t the forecaster weighs expert i by exp(-eta_t * L_{i,t-1}), where
L_{i,t-1} is the expert's cumulative loss so far and eta_t is the *current*
round's rate. Because eta_t changes between rounds the weights are rebuilt
from cumulative losses every round; a multiplicative update of last round's
weights would be a different algorithm.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ewaf.environments import ABSOLUTE, LossFunction
from ewaf.schedules import LearningRateSchedule, ScheduleError, ScheduleKind, validate_schedule


class ForecasterError(ValueError):
    pass


class LossRangeError(ForecasterError):
    """A loss function returned a value outside [0, 1]."""


def compute_weights(cumulative_losses: np.ndarray, eta: float) -> np.ndarray:
    """Normalized weights proportional to exp(-eta * L_i).

    Works in the log domain with the largest exponent (the smallest loss)
    subtracted, so long runs with L growing linearly in t never underflow
    the whole vector.
    """
    L = np.asarray(cumulative_losses, dtype=np.float64)
    # Shift before scaling: the differences L_i - min L are exact, whereas
    # -eta * L loses digits once L is large.
    z = -eta * (L - L.min())
    w = np.exp(z)
    w /= w.sum()
    return w


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """Everything that happened in one round."""

    round: int
    eta: float
    advice: np.ndarray
    weights: np.ndarray
    prediction: float
    outcome: float
    expert_losses: np.ndarray
    forecaster_loss: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("advice", "weights", "expert_losses"):
            d[key] = [float(x) for x in d[key]]
        return d


class Forecaster:
    """Aggregates N experts' advice on [0, 1].

    >>> from ewaf.schedules import LearningRateSchedule
    >>> f = Forecaster(2, LearningRateSchedule.constant(0.5))
    >>> rec = f.step([0.0, 1.0], 1.0)
    >>> rec.prediction, rec.forecaster_loss
    (0.5, 0.5)
    """

    def __init__(
        self,
        num_experts: int,
        schedule: LearningRateSchedule,
        loss: LossFunction = ABSOLUTE,
    ):
        if isinstance(num_experts, bool) or int(num_experts) != num_experts or num_experts < 1:
            raise ForecasterError(f"need at least one expert, got {num_experts!r}")
        self.num_experts = int(num_experts)
        if schedule.kind in (ScheduleKind.PAPER_SQRT, ScheduleKind.CBL_SQRT) and schedule.num_experts != self.num_experts:
            raise ScheduleError(
                f"schedule is bound to N={schedule.num_experts} but forecaster has N={self.num_experts}"
            )
        validate_schedule(schedule, schedule.horizon or 1).raise_if_invalid()
        self.schedule = schedule
        self.loss = loss
        self.round = 0
        self.cumulative_expert_losses = np.zeros(self.num_experts)
        self.cumulative_forecaster_loss = 0.0

    def current_eta(self) -> float:
        """Rate for the upcoming round t = round + 1."""
        return self.schedule.eta(self.round + 1)

    def weights(self) -> np.ndarray:
        return compute_weights(self.cumulative_expert_losses, self.current_eta())

    def _check_advice(self, advice: Sequence[float]) -> np.ndarray:
        a = np.asarray(advice, dtype=np.float64)
        if a.shape != (self.num_experts,):
            raise ForecasterError(
                f"expected advice from {self.num_experts} experts, got shape {a.shape}"
            )
        # Written so that NaN fails too.
        if not (a.min() >= 0.0 and a.max() <= 1.0):
            raise ForecasterError("advice must lie in [0, 1]")
        return a

    @staticmethod
    def _combine(weights: np.ndarray, advice: np.ndarray) -> float:
        p = float(np.dot(weights, advice))
        # Rounding can push the average one ulp outside the hull of the advice.
        return min(max(p, float(advice.min())), float(advice.max()))

    def predict(self, advice: Sequence[float]) -> float:
        a = self._check_advice(advice)
        return self._combine(self.weights(), a)

    def step(self, advice: Sequence[float], outcome: float) -> RoundRecord:
        """Play one round: predict, observe the outcome, charge losses."""
        a = self._check_advice(advice)
        if not (0.0 <= outcome <= 1.0):
            raise ForecasterError(f"outcome must lie in [0, 1], got {outcome!r}")
        t = self.round + 1
        eta = self.schedule.eta(t)
        w = compute_weights(self.cumulative_expert_losses, eta)
        p = self._combine(w, a)
        y = float(outcome)
        expert_losses = self.loss.batch(a, y)
        forecaster_loss = float(self.loss(p, y))
        if not (
            expert_losses.min() >= 0.0
            and expert_losses.max() <= 1.0
            and 0.0 <= forecaster_loss <= 1.0
        ):
            raise LossRangeError(
                f"loss {self.loss.name!r} left [0, 1] at round {t}: "
                f"experts={expert_losses.tolist()}, forecaster={forecaster_loss!r}"
            )
        self.cumulative_expert_losses = self.cumulative_expert_losses + expert_losses
        self.cumulative_forecaster_loss += forecaster_loss
        self.round = t
        return RoundRecord(
            round=t,
            eta=eta,
            advice=_frozen(a),
            weights=_frozen(w),
            prediction=p,
            outcome=y,
            expert_losses=_frozen(expert_losses),
            forecaster_loss=forecaster_loss,
        )

    def regret(self) -> float:
        """Forecaster's cumulative loss minus the best expert's; can be negative."""
        return self.cumulative_forecaster_loss - float(self.cumulative_expert_losses.min())

    def best_expert(self) -> int:
        # argmin returns the first minimizer, i.e. the lowest index on ties.
        return int(np.argmin(self.cumulative_expert_losses))
