"""Loss functions, outcome adversaries and expert-advice generators.

Everything here lives on the unit interval: decisions, outcomes and loss
values are all in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

CONVEXITY_TOL = 1e-12


class EnvError(ValueError):
    """Bad input to a loss or generator: out of range or exhausted."""


def _check_unit(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise EnvError(f"{name} must lie in [0, 1], got {x!r}")


@dataclass(frozen=True)
class LossFunction:
    """A loss l(p, y) that should be convex in p with values in [0, 1].

    ``fn`` is trusted to be cheap and pure. Nothing checks convexity at call
    time; use :func:`convexity_probe` on user-supplied losses.
    """

    name: str
    fn: Callable[[float, float], float]
    # True when fn broadcasts over a numpy array of decisions.
    vectorized: bool = False

    def __call__(self, p: float, y: float) -> float:
        return self.fn(p, y)

    def batch(self, ps: np.ndarray, y: float) -> np.ndarray:
        if self.vectorized:
            return np.asarray(self.fn(ps, y), dtype=np.float64)
        return np.fromiter((self.fn(float(p), y) for p in ps), dtype=np.float64, count=len(ps))


ABSOLUTE = LossFunction("abs", lambda p, y: abs(p - y), vectorized=True)
SQUARED = LossFunction("sq", lambda p, y: (p - y) * (p - y), vectorized=True)

LOSSES = {"abs": ABSOLUTE, "absolute": ABSOLUTE, "sq": SQUARED, "squared": SQUARED}


def eval_loss(loss: LossFunction, p: float, y: float) -> float:
    _check_unit("decision", p)
    _check_unit("outcome", y)
    return loss(p, y)


@dataclass(frozen=True)
class ProbeResult:
    passed: bool
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.passed


def convexity_probe(loss: LossFunction, num_samples: int, seed: int = 0) -> ProbeResult:
    """Randomly test convexity in the first argument and the [0, 1] range.

    Draws (p, p', y, lam) uniformly and checks
    l(lam p + (1 - lam) p', y) <= lam l(p, y) + (1 - lam) l(p', y) + 1e-12.
    Returns the first counterexample found, if any.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.random((num_samples, 4))
    for p, q, y, lam in draws:
        p, q, y, lam = float(p), float(q), float(y), float(lam)
        lp, lq = loss(p, y), loss(q, y)
        mid = lam * p + (1.0 - lam) * q
        lm = loss(mid, y)
        for value, where in ((lp, p), (lq, q), (lm, mid)):
            if not (0.0 <= value <= 1.0):
                return ProbeResult(
                    False, {"kind": "range", "p": where, "y": y, "loss": value}
                )
        if lm > lam * lp + (1.0 - lam) * lq + CONVEXITY_TOL:
            return ProbeResult(
                False,
                {"kind": "convexity", "p": p, "p_prime": q, "y": y, "lam": lam,
                 "lhs": lm, "rhs": lam * lp + (1.0 - lam) * lq},
            )
    return ProbeResult(True)


# --- outcome adversaries -------------------------------------------------

class AdaptiveWorstCase:
    """Sees the prediction and picks the outcome in {0, 1} farthest from it.

    Greedy on instantaneous absolute loss; the tie at 1/2 goes to 0.
    """

    name = "adaptive"

    def next_outcome(self, prediction: float) -> float:
        _check_unit("prediction", prediction)
        return 1.0 if prediction < 0.5 else 0.0


class StochasticOutcomes:
    """I.i.d. Bernoulli(p) outcomes from a seeded stream."""

    def __init__(self, bernoulli_p: float, seed: int | np.random.SeedSequence = 0):
        _check_unit("bernoulli_p", bernoulli_p)
        self.bernoulli_p = float(bernoulli_p)
        self._rng = np.random.default_rng(seed)
        self.name = f"bernoulli:{self.bernoulli_p!r}"

    def next_outcome(self, prediction: float) -> float:
        _check_unit("prediction", prediction)
        return 1.0 if self._rng.random() < self.bernoulli_p else 0.0


class FixedOutcomes:
    """Replays a given outcome sequence, ignoring the prediction."""

    name = "fixed"

    def __init__(self, outcomes: Sequence[float]):
        self.outcomes = tuple(float(y) for y in outcomes)
        for y in self.outcomes:
            _check_unit("outcome", y)
        self._pos = 0

    def next_outcome(self, prediction: float) -> float:
        if self._pos >= len(self.outcomes):
            raise EnvError(f"fixed outcome sequence exhausted after {len(self.outcomes)} rounds")
        y = self.outcomes[self._pos]
        self._pos += 1
        return y


# --- advice generators ---------------------------------------------------

class ConstantExperts:
    """Expert i always advises values[i]."""

    name = "constant"

    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise EnvError("constant experts need a non-empty list of values")
        for v in self.values:
            _check_unit("advice", float(v))
        self.values.flags.writeable = False

    @property
    def num_experts(self) -> int:
        return self.values.size

    def next_advice(self, t: int) -> np.ndarray:
        if t < 1:
            raise EnvError(f"rounds are numbered from 1, got t={t}")
        return self.values


def reflect_unit(x: np.ndarray) -> np.ndarray:
    """Fold the real line onto [0, 1] by reflecting at both ends."""
    x = np.mod(x, 2.0)
    return np.where(x > 1.0, 2.0 - x, x)


class RandomWalkExperts:
    """Independent random walks reflected into [0, 1].

    Starts are uniform; increments are uniform on [-step, step]. The path is
    generated lazily and cached, so advice for round t depends only on the
    seed and t, never on the order of queries.
    """

    def __init__(self, num_experts: int, step: float, seed: int | np.random.SeedSequence = 0):
        if num_experts < 1:
            raise EnvError("need at least one expert")
        if not (step >= 0 and math.isfinite(step)):
            raise EnvError(f"walk step must be a finite non-negative number, got {step!r}")
        self.step = float(step)
        self._rng = np.random.default_rng(seed)
        self._path = [reflect_unit(self._rng.random(num_experts))]
        self.name = f"walk:{self.step!r}"

    @property
    def num_experts(self) -> int:
        return self._path[0].size

    def next_advice(self, t: int) -> np.ndarray:
        if t < 1:
            raise EnvError(f"rounds are numbered from 1, got t={t}")
        while len(self._path) < t:
            inc = self._rng.uniform(-self.step, self.step, self.num_experts)
            row = reflect_unit(self._path[-1] + inc)
            row.flags.writeable = False
            self._path.append(row)
        return self._path[t - 1]


class FixedAdvice:
    """Advice read from a matrix with one row per round and one column per expert."""

    name = "fixed"

    def __init__(self, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if m.size == 0:
            raise EnvError("fixed advice matrix is empty")
        if np.any((m < 0) | (m > 1)) or np.any(np.isnan(m)):
            raise EnvError("fixed advice values must lie in [0, 1]")
        m.flags.writeable = False
        self.matrix = m

    @property
    def num_experts(self) -> int:
        return self.matrix.shape[1]

    def next_advice(self, t: int) -> np.ndarray:
        if t < 1:
            raise EnvError(f"rounds are numbered from 1, got t={t}")
        if t > self.matrix.shape[0]:
            raise EnvError(f"fixed advice has {self.matrix.shape[0]} rounds, round {t} requested")
        return self.matrix[t - 1]
