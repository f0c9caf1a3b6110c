"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ewaf.experiment import (
    CONFIG_KEYS,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VERIFY,
    OUT_DIR_ENV,
    ConfigError,
    ExperimentConfig,
    bound_table,
    parse_bool,
    read_config_file,
    run_experiment,
    table_csv,
    table_json,
)
from ewaf.schedules import ScheduleError

log = logging.getLogger("ewaf")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ewaf",
        description="Run the time-varying-rate exponentially weighted forecaster and check its regret bounds.",
        epilog=f"If --out is omitted, output goes to ${OUT_DIR_ENV} when set, else stdout.",
    )
    # Defaults are None so config-file values can sit underneath the flags.
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--experts", help="number of experts N (comma list with --bound-table)")
    p.add_argument("--horizon", help="number of rounds n (comma list with --bound-table)")
    p.add_argument("--schedule", help="paper | cbl | constant:<v> | custom:<path>")
    p.add_argument("--loss", choices=["abs", "sq"])
    p.add_argument("--adversary", help="adaptive | bernoulli:<p> | fixed:<path>")
    p.add_argument("--advice", help="constant:<csv> | walk:<step> | fixed:<path>")
    p.add_argument("--seed", type=int)
    p.add_argument("--verify", action="store_true", default=None, help="certify every round with the proof ledger")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", help="output path")
    p.add_argument("--bound-table", action="store_true", default=None,
                   help="emit a grid of bounds instead of running the forecaster")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _int(key: str, value) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _int_list(key: str, value: str) -> list[int]:
    return [_int(key, v) for v in str(value).split(",") if v.strip()]


def merged_settings(args: argparse.Namespace) -> dict:
    settings: dict = {}
    if args.config:
        settings.update(read_config_file(args.config))
    for key in list(CONFIG_KEYS) + ["bound_table"]:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def config_from_settings(settings: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in settings.items():
        if key == "bound_table":
            continue
        if key in ("experts", "horizon", "seed"):
            kwargs[key] = _int(key, value)
        elif key == "verify":
            kwargs[key] = value if isinstance(value, bool) else parse_bool(value)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def run_bound_table(settings: dict) -> int:
    experts = _int_list("experts", settings.get("experts", "2"))
    horizons = _int_list("horizon", settings.get("horizon", "100"))
    schedules = [s.strip() for s in str(settings.get("schedule", "paper")).split(",") if s.strip()]
    fmt = settings.get("format", "csv")
    if not experts or not horizons or not schedules:
        raise ConfigError("bound table needs at least one N, one n and one schedule")
    if min(experts) < 1 or min(horizons) < 1:
        raise ConfigError("bound table needs N >= 1 and n >= 1")
    rows = bound_table(experts, horizons, schedules)
    text = table_json(rows) if fmt == "json" else table_csv(rows)
    out = settings.get("out")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = merged_settings(args)
        bt = settings.get("bound_table")
        if bt is not None and (bt if isinstance(bt, bool) else parse_bool(bt)):
            return run_bound_table(settings)
        config = config_from_settings(settings)
        status, result = run_experiment(config, stdout=sys.stdout)
    except (ConfigError, ScheduleError) as exc:
        print(f"ewaf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = result.report
    log.info(
        "N=%d n=%d regret=%.6g bound=%.6g comparison=%.6g",
        report.num_experts, report.n, report.realized_regret, report.bound_eq1, report.bound_comparison,
    )
    if status == EXIT_VERIFY:
        for msg in result.violations[:10]:
            print(f"ewaf: verification failure: {msg}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
