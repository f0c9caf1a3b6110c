"""Round-by-round numerical certificate for the regret argument.

For every round the ledger recomputes the potential values

    log s_{i,t} = -eta_t L_{i,t} + eta_t L_hat_t - (eta_t / 8) * sum_{k<=t} eta_k

two ways (closed form, and the one-step recursion from s_{i,t-1}) and checks
each inequality the argument chains together:

* convexity:   l(p_hat, y) <= sum_i q_i l(f_i, y)
* Hoeffding:   exp(-eta l(p_hat, y)) >= sum_i q_i exp(-eta l(f_i, y) - eta^2/8)
* ratio:       q_i equals the normalized (s_{i,t-1})^alpha, alpha = eta_t/eta_{t-1}
* power mean:  mean_j s_{j,t-1}^alpha <= (mean_j s_{j,t-1})^alpha
* combined:    exp(-eta l(p_hat, y)) >= sum_i (1/N) s_{i,t-1}^alpha exp(-eta l(f_i, y) - eta^2/8)
* mass:        mean_j s_{j,t} <= 1

All s arithmetic stays in the log domain. eta_0 is taken to be eta_1, which
makes the first recursion exponent 1; s_{i,0} = 1 so the choice is inert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ewaf.forecaster import RoundRecord

# Single-step algebraic identities.
STEP_TOL = 1e-12
# Quantities accumulated over many rounds.
ACCUM_TOL = 1e-9


class LedgerViolation(AssertionError):
    """An inequality of the regret argument failed beyond tolerance."""

    def __init__(self, inequality: str, round_: int, lhs: float, rhs: float, tol: float):
        self.inequality = inequality
        self.round = round_
        self.lhs = lhs
        self.rhs = rhs
        self.tol = tol
        super().__init__(
            f"{inequality} check failed at round {round_}: lhs={lhs!r}, rhs={rhs!r}, tol={tol:g}"
        )


def logsumexp(x: np.ndarray) -> float:
    m = float(x.max())
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.exp(x - m).sum()))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProofLedgerRow:
    round: int
    log_s: np.ndarray
    mass: float
    hoeffding_lhs: float
    hoeffding_rhs: float
    powermean_lhs: float
    powermean_rhs: float
    recursion_residual: float
    # Extra per-round checks and the running sums the closed form needs.
    convexity_lhs: float = 0.0
    convexity_rhs: float = 0.0
    combined_lhs: float = 1.0
    combined_rhs: float = 1.0
    ratio_residual: float = 0.0
    eta: float | None = None
    log_s_recursive: np.ndarray = field(default=None)
    cum_expert_losses: np.ndarray = field(default=None)
    cum_forecaster_loss: float = 0.0
    eta_sum: float = 0.0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "eta": self.eta,
            "log_s": [float(x) for x in self.log_s],
            "mass": self.mass,
            "hoeffding_lhs": self.hoeffding_lhs,
            "hoeffding_rhs": self.hoeffding_rhs,
            "powermean_lhs": self.powermean_lhs,
            "powermean_rhs": self.powermean_rhs,
            "recursion_residual": self.recursion_residual,
            "convexity_lhs": self.convexity_lhs,
            "convexity_rhs": self.convexity_rhs,
            "combined_lhs": self.combined_lhs,
            "combined_rhs": self.combined_rhs,
            "ratio_residual": self.ratio_residual,
        }


def initial_row(num_experts: int) -> ProofLedgerRow:
    """Row for t = 0, where every s_{i,0} = 1."""
    zeros = _frozen(np.zeros(num_experts))
    return ProofLedgerRow(
        round=0,
        log_s=zeros,
        mass=1.0,
        hoeffding_lhs=1.0,
        hoeffding_rhs=1.0,
        powermean_lhs=1.0,
        powermean_rhs=1.0,
        recursion_residual=0.0,
        log_s_recursive=zeros,
        cum_expert_losses=zeros,
    )


def s_closed_form(history: Sequence[RoundRecord], t: int) -> np.ndarray:
    """log s_{i,t} recomputed from scratch out of rounds 1..t of ``history``."""
    if t < 0 or t > len(history):
        raise ValueError(f"history has {len(history)} rounds, t={t} requested")
    if t == 0:
        n = len(history[0].advice) if history else 0
        return np.zeros(n)
    rounds = history[:t]
    eta_t = rounds[-1].eta
    cum_experts = np.sum([r.expert_losses for r in rounds], axis=0)
    cum_forecaster = math.fsum(r.forecaster_loss for r in rounds)
    eta_sum = math.fsum(r.eta for r in rounds)
    return -eta_t * cum_experts + eta_t * cum_forecaster - eta_t * eta_sum / 8.0


def s_recursive_step(prev_log_s: np.ndarray, record: RoundRecord, eta_prev: float) -> np.ndarray:
    """log s_{i,t} from log s_{i,t-1}: raise to eta_t/eta_{t-1}, then charge round t."""
    eta = record.eta
    if not (eta > 0):
        raise LedgerViolation("positive-rate", record.round, eta, 0.0, 0.0)
    if eta_prev < eta:
        raise LedgerViolation("nonincreasing-rate", record.round, eta_prev, eta, 0.0)
    alpha = eta / eta_prev
    return (
        alpha * np.asarray(prev_log_s)
        - eta * record.expert_losses
        + eta * record.forecaster_loss
        - eta * eta / 8.0
    )


def check_round(
    prev_row: ProofLedgerRow,
    record: RoundRecord,
    eta_prev: float,
    strict: bool = True,
) -> ProofLedgerRow:
    """Certify round ``record.round`` given the ledger row of the round before.

    With ``strict`` (the default) the first failing inequality raises
    :class:`LedgerViolation`; otherwise the row is returned regardless and
    :func:`row_failures` reports what failed.
    """
    t = record.round
    if t != prev_row.round + 1:
        raise ValueError(f"ledger row is for round {prev_row.round}, record is round {t}")
    n_experts = len(prev_row.log_s)
    log_n = math.log(n_experts)
    eta = record.eta
    q = record.weights
    losses = record.expert_losses
    f_loss = record.forecaster_loss

    recursive = s_recursive_step(prev_row.log_s_recursive, record, eta_prev)
    alpha = eta / eta_prev

    cum_experts = prev_row.cum_expert_losses + losses
    cum_forecaster = prev_row.cum_forecaster_loss + f_loss
    eta_sum = prev_row.eta_sum + eta
    closed = -eta * cum_experts + eta * cum_forecaster - eta * eta_sum / 8.0
    recursion_residual = float(np.abs(closed - recursive).max())

    mass = math.exp(logsumexp(closed) - log_n)

    convexity_rhs = float(np.dot(q, losses))
    slack = math.exp(-eta * eta / 8.0)
    exp_losses = np.exp(-eta * losses)
    hoeffding_lhs = math.exp(-eta * f_loss)
    hoeffding_rhs = float(np.dot(q, exp_losses)) * slack

    scaled_prev = alpha * prev_row.log_s
    lse_scaled = logsumexp(scaled_prev)
    powermean_lhs = math.exp(lse_scaled - log_n)
    powermean_rhs = math.exp(alpha * (logsumexp(prev_row.log_s) - log_n))

    q_from_s = np.exp(scaled_prev - lse_scaled)
    ratio_residual = float(np.abs(q_from_s - q).max())

    combined_rhs = float(np.dot(np.exp(scaled_prev - log_n), exp_losses)) * slack

    row = ProofLedgerRow(
        round=t,
        log_s=_frozen(closed),
        mass=mass,
        hoeffding_lhs=hoeffding_lhs,
        hoeffding_rhs=hoeffding_rhs,
        powermean_lhs=powermean_lhs,
        powermean_rhs=powermean_rhs,
        recursion_residual=recursion_residual,
        convexity_lhs=f_loss,
        convexity_rhs=convexity_rhs,
        combined_lhs=hoeffding_lhs,
        combined_rhs=combined_rhs,
        ratio_residual=ratio_residual,
        eta=eta,
        log_s_recursive=_frozen(recursive),
        cum_expert_losses=_frozen(cum_experts),
        cum_forecaster_loss=cum_forecaster,
        eta_sum=eta_sum,
    )
    if strict:
        failures = row_failures(row)
        if failures:
            raise failures[0]
    return row


def row_failures(row: ProofLedgerRow) -> list[LedgerViolation]:
    """Every inequality the row violates beyond its tolerance."""
    t = row.round
    out = []
    if row.convexity_lhs > row.convexity_rhs + STEP_TOL:
        out.append(LedgerViolation("convexity", t, row.convexity_lhs, row.convexity_rhs, STEP_TOL))
    if row.hoeffding_lhs < row.hoeffding_rhs - STEP_TOL:
        out.append(LedgerViolation("hoeffding", t, row.hoeffding_lhs, row.hoeffding_rhs, STEP_TOL))
    if row.ratio_residual > ACCUM_TOL:
        out.append(LedgerViolation("ratio-identity", t, row.ratio_residual, 0.0, ACCUM_TOL))
    if row.powermean_lhs > row.powermean_rhs + STEP_TOL:
        out.append(LedgerViolation("power-mean", t, row.powermean_lhs, row.powermean_rhs, STEP_TOL))
    if row.combined_lhs < row.combined_rhs - ACCUM_TOL:
        out.append(LedgerViolation("combined", t, row.combined_lhs, row.combined_rhs, ACCUM_TOL))
    if row.recursion_residual > ACCUM_TOL:
        out.append(LedgerViolation("recursion", t, row.recursion_residual, 0.0, ACCUM_TOL))
    if row.mass > 1.0 + ACCUM_TOL:
        out.append(LedgerViolation("mass", t, row.mass, 1.0, ACCUM_TOL))
    return out


def endgame_failures(row: ProofLedgerRow) -> list[LedgerViolation]:
    """Final step: (1/N) s_{i,n} <= 1, i.e. log s_{i,n} <= ln N, for every i."""
    log_n = math.log(len(row.log_s))
    worst = float(np.max(row.log_s))
    out = []
    if math.exp(worst - log_n) > 1.0 + ACCUM_TOL:
        out.append(LedgerViolation("endgame-mass", row.round, math.exp(worst - log_n), 1.0, ACCUM_TOL))
    if worst > log_n + ACCUM_TOL:
        out.append(LedgerViolation("endgame-log", row.round, worst, log_n, ACCUM_TOL))
    return out


@dataclass
class LedgerSummary:
    rounds: int = 0
    max_mass: float = 1.0
    min_hoeffding_slack: float = math.inf
    max_powermean_excess: float = -math.inf
    max_recursion_residual: float = 0.0
    max_ratio_residual: float = 0.0
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        def finite(x):
            return x if math.isfinite(x) else None

        return {
            "rounds": self.rounds,
            "passed": self.passed,
            "max_mass": self.max_mass,
            "min_hoeffding_slack": finite(self.min_hoeffding_slack),
            "max_powermean_excess": finite(self.max_powermean_excess),
            "max_recursion_residual": self.max_recursion_residual,
            "max_ratio_residual": self.max_ratio_residual,
            "violations": list(self.violations),
        }


class ProofLedger:
    """Wraps a run: feed it each RoundRecord in order.

    In strict mode a failing check raises immediately. Otherwise failures are
    collected in ``summary.violations`` and the run continues.
    """

    def __init__(self, num_experts: int, strict: bool = True, keep_rows: bool = True):
        self.strict = strict
        self.keep_rows = keep_rows
        self.last = initial_row(num_experts)
        self.rows: list[ProofLedgerRow] = [self.last] if keep_rows else []
        self.summary = LedgerSummary()
        self._eta_prev: float | None = None

    def observe(self, record: RoundRecord) -> ProofLedgerRow:
        eta_prev = record.eta if self._eta_prev is None else self._eta_prev
        row = check_round(self.last, record, eta_prev, strict=self.strict)
        if not self.strict:
            self.summary.violations.extend(str(v) for v in row_failures(row))
        s = self.summary
        s.rounds = row.round
        s.max_mass = max(s.max_mass, row.mass) if row.round > 1 else row.mass
        s.min_hoeffding_slack = min(s.min_hoeffding_slack, row.hoeffding_lhs - row.hoeffding_rhs)
        s.max_powermean_excess = max(s.max_powermean_excess, row.powermean_lhs - row.powermean_rhs)
        s.max_recursion_residual = max(s.max_recursion_residual, row.recursion_residual)
        s.max_ratio_residual = max(s.max_ratio_residual, row.ratio_residual)
        self._eta_prev = record.eta
        self.last = row
        if self.keep_rows:
            self.rows.append(row)
        return row

    def finish(self) -> list[LedgerViolation]:
        """Run the final-round check; returns (or raises, if strict) failures."""
        failures = endgame_failures(self.last) if self.last.round > 0 else []
        if failures and self.strict:
            raise failures[0]
        self.summary.violations.extend(str(v) for v in failures)
        return failures
