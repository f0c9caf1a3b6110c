"""Experiment orchestration shared by the CLI and the test-suite.

``simulate`` runs one forecaster against an environment and returns the
trajectory in memory; ``run_experiment`` adds config validation and file
output on top of it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ewaf.bounds import (
    RUN_TOL,
    BoundReport,
    PrefixBound,
    bound_comparison,
    bound_corollary,
    bound_corollary_prior,
    bound_time_varying,
    compare_bounds,
)
from ewaf.environments import (
    LOSSES,
    AdaptiveWorstCase,
    ConstantExperts,
    EnvError,
    FixedAdvice,
    FixedOutcomes,
    LossFunction,
    RandomWalkExperts,
    StochasticOutcomes,
)
from ewaf.forecaster import Forecaster, ForecasterError, RoundRecord
from ewaf.ledger import LedgerViolation, ProofLedger
from ewaf.schedules import LearningRateSchedule, ScheduleError, validate_schedule

OUT_DIR_ENV = "EWAF_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


class ConfigError(ValueError):
    pass


# --- parsing of the small spec strings used by the CLI -------------------

_NUM_SPLIT = re.compile(r"[,\s]+")


def read_numbers(path: str | Path) -> list[float]:
    """Numbers separated by commas, whitespace or newlines; '#' starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                out.extend(float(tok) for tok in _NUM_SPLIT.split(line) if tok)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    return out


def read_matrix(path: str | Path) -> np.ndarray:
    """One row per line, comma or whitespace separated."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                rows.append([float(tok) for tok in _NUM_SPLIT.split(line) if tok])
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: advice matrix must be non-empty and rectangular")
    return np.array(rows)


def _split_spec(spec: str) -> tuple[str, str]:
    head, _, arg = spec.partition(":")
    return head.strip().lower(), arg.strip()


def _float_arg(spec: str, arg: str) -> float:
    try:
        return float(arg)
    except ValueError:
        raise ConfigError(f"bad number in {spec!r}") from None


def parse_schedule(spec: str, num_experts: int) -> LearningRateSchedule:
    kind, arg = _split_spec(spec)
    try:
        if kind == "paper":
            return LearningRateSchedule.paper_sqrt(num_experts)
        if kind == "cbl":
            return LearningRateSchedule.cbl_sqrt(num_experts)
        if kind == "constant":
            return LearningRateSchedule.constant(_float_arg(spec, arg))
        if kind == "custom":
            if not arg:
                raise ConfigError("custom schedule needs a file: custom:<path>")
            return LearningRateSchedule.custom(read_numbers(arg))
    except ScheduleError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown schedule {spec!r}; expected paper|cbl|constant:<v>|custom:<path>")


def parse_loss(spec: str) -> LossFunction:
    try:
        return LOSSES[spec.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown loss {spec!r}; expected abs|sq") from None


def parse_adversary(spec: str, seed):
    kind, arg = _split_spec(spec)
    try:
        if kind == "adaptive":
            return AdaptiveWorstCase()
        if kind == "bernoulli":
            return StochasticOutcomes(_float_arg(spec, arg), seed)
        if kind == "fixed":
            return FixedOutcomes(read_numbers(arg))
    except EnvError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown adversary {spec!r}; expected adaptive|bernoulli:<p>|fixed:<path>")


def parse_advice(spec: str, num_experts: int, seed):
    kind, arg = _split_spec(spec)
    try:
        if kind == "constant":
            values = [_float_arg(spec, v) for v in arg.split(",") if v.strip()]
            return ConstantExperts(values)
        if kind == "walk":
            return RandomWalkExperts(num_experts, _float_arg(spec, arg), seed)
        if kind == "fixed":
            return FixedAdvice(read_matrix(arg))
    except EnvError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown advice {spec!r}; expected constant:<csv>|walk:<step>|fixed:<path>")


# --- configuration -------------------------------------------------------

@dataclass
class ExperimentConfig:
    experts: int = 2
    horizon: int = 100
    schedule: str = "paper"
    loss: str = "abs"
    adversary: str = "adaptive"
    advice: str = "walk:0.1"
    seed: int = 0
    verify: bool = False
    format: str = "csv"
    out: str | None = None

    def to_dict(self) -> dict:
        # The output location is not part of the experiment, so it is not echoed.
        d = asdict(self)
        d.pop("out")
        return d

    def build(self) -> "Experiment":
        """Resolve every spec string; raises ConfigError before anything runs."""
        if self.experts < 1:
            raise ConfigError(f"--experts must be >= 1, got {self.experts}")
        if self.horizon < 1:
            raise ConfigError(f"--horizon must be >= 1, got {self.horizon}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {self.format!r}")
        schedule = parse_schedule(self.schedule, self.experts)
        check = validate_schedule(schedule, self.horizon)
        if not check.ok:
            raise ConfigError(f"invalid schedule: {check.reason}")
        loss = parse_loss(self.loss)
        adv_seed, advice_seed = np.random.SeedSequence(self.seed).spawn(2)
        adversary = parse_adversary(self.adversary, adv_seed)
        advice = parse_advice(self.advice, self.experts, advice_seed)
        if advice.num_experts != self.experts:
            raise ConfigError(
                f"advice provides {advice.num_experts} experts but --experts is {self.experts}"
            )
        if isinstance(advice, FixedAdvice) and advice.matrix.shape[0] < self.horizon:
            raise ConfigError(
                f"fixed advice has {advice.matrix.shape[0]} rounds, horizon is {self.horizon}"
            )
        if isinstance(adversary, FixedOutcomes) and len(adversary.outcomes) < self.horizon:
            raise ConfigError(
                f"fixed outcomes have {len(adversary.outcomes)} rounds, horizon is {self.horizon}"
            )
        return Experiment(self, schedule, loss, adversary, advice)


CONFIG_KEYS = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' comments; dashes in keys are allowed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        if key not in CONFIG_KEYS and key != "bound_table":
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


# --- running ---------------------------------------------------------------

TRAJECTORY_COLUMNS = (
    "t",
    "eta_t",
    "prediction",
    "outcome",
    "forecaster_loss",
    "cumulative_forecaster_loss",
    "min_cumulative_expert_loss",
    "regret",
    "bound_eq1_prefix",
    "ledger_mass",
)


@dataclass(frozen=True)
class TrajectoryRow:
    t: int
    eta_t: float
    prediction: float
    outcome: float
    forecaster_loss: float
    cumulative_forecaster_loss: float
    min_cumulative_expert_loss: float
    regret: float
    bound_eq1_prefix: float
    ledger_mass: float | None = None


@dataclass
class RunResult:
    rows: list[TrajectoryRow]
    records: list[RoundRecord]
    report: BoundReport
    ledger: ProofLedger | None = None
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.report.violation


def simulate(
    num_experts: int,
    horizon: int,
    schedule: LearningRateSchedule,
    loss: LossFunction,
    adversary,
    advice,
    verify: bool = False,
    strict: bool = False,
    keep_ledger_rows: bool = True,
) -> RunResult:
    """Play ``horizon`` rounds and check regret against every prefix bound.

    With ``verify`` a :class:`ProofLedger` certifies each round. Failures are
    collected in ``violations``; pass ``strict=True`` to raise instead.
    """
    forecaster = Forecaster(num_experts, schedule, loss)
    ledger = ProofLedger(num_experts, strict=strict, keep_rows=keep_ledger_rows) if verify else None
    prefix = PrefixBound(num_experts)
    rows: list[TrajectoryRow] = []
    records: list[RoundRecord] = []
    violations: list[str] = []
    for t in range(1, horizon + 1):
        a = advice.next_advice(t)
        y = adversary.next_outcome(forecaster.predict(a))
        rec = forecaster.step(a, y)
        records.append(rec)
        mass = ledger.observe(rec).mass if ledger is not None else None
        bound = prefix.push(rec.eta)
        regret = forecaster.regret()
        if regret > bound + RUN_TOL:
            msg = f"regret {regret!r} exceeds prefix bound {bound!r} at round {t}"
            if strict:
                raise LedgerViolation("prefix-bound", t, regret, bound, RUN_TOL)
            violations.append(msg)
        rows.append(
            TrajectoryRow(
                t=t,
                eta_t=rec.eta,
                prediction=rec.prediction,
                outcome=rec.outcome,
                forecaster_loss=rec.forecaster_loss,
                cumulative_forecaster_loss=forecaster.cumulative_forecaster_loss,
                min_cumulative_expert_loss=float(forecaster.cumulative_expert_losses.min()),
                regret=regret,
                bound_eq1_prefix=bound,
                ledger_mass=mass,
            )
        )
    if ledger is not None:
        ledger.finish()
        violations.extend(ledger.summary.violations)
    report = compare_bounds(schedule, num_experts, horizon, forecaster.regret())
    if report.violation:
        violations.append(
            f"final regret {report.realized_regret!r} exceeds bound {report.bound_eq1!r}"
        )
    return RunResult(rows, records, report, ledger, violations)


@dataclass
class Experiment:
    config: ExperimentConfig
    schedule: LearningRateSchedule
    loss: LossFunction
    adversary: object
    advice: object

    def run(self) -> RunResult:
        c = self.config
        return simulate(
            c.experts, c.horizon, self.schedule, self.loss, self.adversary, self.advice,
            verify=c.verify,
        )


def fmt_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def trajectory_csv(rows: list[TrajectoryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for r in rows:
        w.writerow([fmt_float(getattr(r, c)) for c in TRAJECTORY_COLUMNS])
    return buf.getvalue()


def ledger_csv(ledger: ProofLedger, num_experts: int) -> str:
    cols = [
        "round", "eta", "mass", "hoeffding_lhs", "hoeffding_rhs", "powermean_lhs",
        "powermean_rhs", "recursion_residual", "ratio_residual", "convexity_lhs",
        "convexity_rhs", "combined_lhs", "combined_rhs",
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols + [f"log_s_{i}" for i in range(num_experts)])
    for row in ledger.rows[1:]:
        w.writerow(
            [fmt_float(getattr(row, c)) for c in cols] + [fmt_float(v) for v in row.log_s]
        )
    return buf.getvalue()


def json_document(config: ExperimentConfig, result: RunResult) -> str:
    doc = {
        "config": config.to_dict(),
        "rows": [asdict(r) for r in result.rows],
        "bound_report": result.report.to_dict(),
        "ledger_summary": result.ledger.summary.to_dict() if result.ledger else None,
        "ledger": [r.to_dict() for r in result.ledger.rows[1:]] if result.ledger else None,
        "violations": result.violations,
    }
    return json.dumps(doc, indent=2) + "\n"


def render_outputs(config: ExperimentConfig, result: RunResult) -> dict[str, str]:
    """Map of output-file suffix to file contents.

    The key "" is the main document; sidecars use ".bounds.json" and
    ".ledger.csv" and are only produced for CSV output.
    """
    if config.format == "json":
        return {"": json_document(config, result)}
    out = {"": trajectory_csv(result.rows)}
    report = {
        "config": config.to_dict(),
        "bound_report": result.report.to_dict(),
        "ledger_summary": result.ledger.summary.to_dict() if result.ledger else None,
        "violations": result.violations,
    }
    out[".bounds.json"] = json.dumps(report, indent=2) + "\n"
    if result.ledger is not None:
        out[".ledger.csv"] = ledger_csv(result.ledger, config.experts)
    return out


def default_output_path(config: ExperimentConfig) -> Path | None:
    if config.out:
        return Path(config.out)
    out_dir = os.environ.get(OUT_DIR_ENV)
    if not out_dir:
        return None
    tag = re.sub(r"[^A-Za-z0-9.]+", "-", config.schedule.split("/")[-1])
    return Path(out_dir) / f"ewaf_N{config.experts}_n{config.horizon}_{tag}_seed{config.seed}.{config.format}"


def sidecar_path(main: Path, suffix: str) -> Path:
    return main.with_name(main.stem + suffix)


def run_experiment(config: ExperimentConfig, stdout=None) -> tuple[int, RunResult]:
    """Validate, run, and write outputs. Returns (exit status, result).

    Config errors raise ConfigError before any file is written. A failed
    bound or ledger check still writes outputs but returns EXIT_VERIFY.
    """
    experiment = config.build()
    try:
        result = experiment.run()
    except (EnvError, ForecasterError, ScheduleError) as exc:
        raise ConfigError(str(exc)) from exc
    outputs = render_outputs(config, result)
    path = default_output_path(config)
    if path is None:
        if stdout is not None:
            stdout.write(outputs[""])
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        for suffix, text in outputs.items():
            target = path if not suffix else sidecar_path(path, suffix)
            with open(target, "w", newline="") as fh:
                fh.write(text)
    return (EXIT_OK if result.passed else EXIT_VERIFY), result


# --- bound table -----------------------------------------------------------

TABLE_COLUMNS = (
    "schedule",
    "num_experts",
    "horizon",
    "bound_eq1",
    "bound_comparison",
    "ratio",
    "bound_corollary",
    "bound_corollary_prior",
)


def bound_table(
    experts: list[int], horizons: list[int], schedules: list[str]
) -> list[dict]:
    """Grid of the bounds for every (schedule, N, n) cell, sorted by that key.

    ``bound_corollary`` is sqrt(n ln N) and ``bound_corollary_prior`` is
    sqrt(2 n ln N) + sqrt(ln N / 8); both are None for N = 1.
    """
    rows = []
    for spec in schedules:
        for n_exp in experts:
            schedule = parse_schedule(spec, n_exp)
            for n in horizons:
                check = validate_schedule(schedule, n)
                if not check.ok:
                    raise ConfigError(f"schedule {spec!r} invalid at horizon {n}: {check.reason}")
                tv = bound_time_varying(schedule, n_exp, n)
                cmp_ = bound_comparison(schedule, n_exp, n)
                rows.append({
                    "schedule": spec,
                    "num_experts": n_exp,
                    "horizon": n,
                    "bound_eq1": tv,
                    "bound_comparison": cmp_,
                    "ratio": cmp_ / tv,
                    "bound_corollary": bound_corollary(n_exp, n) if n_exp >= 2 else None,
                    "bound_corollary_prior": bound_corollary_prior(n_exp, n) if n_exp >= 2 else None,
                })
    rows.sort(key=lambda r: (r["schedule"], r["num_experts"], r["horizon"]))
    return rows


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else fmt_float(r[c]) for c in TABLE_COLUMNS])
    return buf.getvalue()


def table_json(rows: list[dict]) -> str:
    return json.dumps({"rows": rows}, indent=2) + "\n"
