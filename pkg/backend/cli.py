"""
Command-line surface of the consensus laboratory.

    python main.py sweep --config sweep.env --threads 8 --out results/
    python main.py bounds freedman lam=0.1 W=0.01 D=0.02

Exit codes: 0 success, 2 configuration error, 3 acceptance failure,
4 enumeration budget exceeded.
"""

import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

import tail_bounds
from config import config
from errors import AcceptanceFailure, ConfigError, LabError
from experiments import (
    load_experiment_config,
    run_coupling_check,
    run_drift_check,
    run_gap_experiment,
    run_lower_bound_check,
    run_many_opinions_check,
    run_scaling_sweep,
    run_simulation,
    slope_within_window,
)
from models import BoundKind, ExperimentConfig
from reporting import (
    DRIFT_COLUMNS,
    to_jsonable,
    write_json,
    write_rows_csv,
    write_sweep_csv,
)

logger = logging.getLogger(__name__)

BOUND_CALCULATORS: Dict[BoundKind, Callable] = {
    BoundKind.FREEDMAN: tail_bounds.freedman_bound,
    BoundKind.GAMBLER_RUIN: tail_bounds.gambler_ruin_bound,
    BoundKind.MULTIPLICATIVE_DRIFT: tail_bounds.multiplicative_drift_bound,
    BoundKind.VARIANCE_STOP: tail_bounds.variance_stop_bound,
    BoundKind.RATIO_MEAN: tail_bounds.ratio_mean_bound,
    BoundKind.RATIO_SECOND_MOMENT: tail_bounds.ratio_second_moment_bound,
}

# calculator keyword for each command-line parameter name
BOUND_PARAMETER_ALIASES = {
    "X0": "x0",
    "EX0sq": "ex0_sq",
    "EXtausq": "extau_sq",
    "VarX": "var_x",
    "VarY": "var_y",
}


def _output_path(cfg: ExperimentConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _emit(result, cfg: ExperimentConfig, name: str, fmt: str, rows=None, columns=None) -> str:
    """Write the result as JSON, or its rows as CSV when asked and available"""
    if fmt == "csv" and rows is not None:
        return write_rows_csv(rows, columns, _output_path(cfg, f"{name}.csv"))
    return write_json(result, _output_path(cfg, f"{name}.json"))


def _require(condition: bool, check: bool, message: str):
    if check and not condition:
        raise AcceptanceFailure(message)
    if not condition:
        logger.warning("acceptance window missed: %s", message)


def cmd_simulate(cfg: ExperimentConfig, args) -> object:
    report = run_simulation(cfg)
    rows = [
        {"step": step, "gamma": gamma, "counts": ";".join(str(c) for c in counts)}
        for step, counts, gamma in report.snapshots
    ]
    _emit(report, cfg, "simulate", args.format, rows, ["step", "gamma", "counts"])
    return report


def cmd_sweep(cfg: ExperimentConfig, args) -> object:
    result = run_scaling_sweep(cfg)
    write_sweep_csv(result.records, _output_path(cfg, "sweep.csv"))
    write_json(
        {"aggregates": result.aggregates, "slopes": result.slopes, "metadata": result.metadata},
        _output_path(cfg, "sweep.json"),
    )
    _require(
        slope_within_window(result, cfg),
        args.check,
        f"log-log slopes {result.slopes} outside {cfg.slope_window}",
    )
    return {"aggregates": result.aggregates, "slopes": result.slopes}


def cmd_lower_bound(cfg: ExperimentConfig, args) -> object:
    cells = run_lower_bound_check(cfg)
    rows = [cell.model_dump() for cell in cells]
    columns = list(rows[0]) if rows else []
    _emit(cells, cfg, "lower_bound", args.format, rows, columns)
    failing = [(c.n, c.k, c.fraction) for c in cells if not c.passed]
    _require(not failing, args.check, f"cells above the failure fraction: {failing}")
    return cells


def cmd_gap(cfg: ExperimentConfig, args) -> object:
    cells = run_gap_experiment(cfg)
    rows = [cell.model_dump() for cell in cells]
    columns = list(rows[0]) if rows else []
    _emit(cells, cfg, "gap", args.format, rows, columns)
    # k = 2 cells are exploratory, both dynamics are fast there
    short = [(c.n, c.k, c.ratio) for c in cells if c.k > 2 and (c.ratio or 0) < cfg.min_ratio]
    _require(not short, args.check, f"gap ratio below {cfg.min_ratio}: {short}")
    return cells


def cmd_many_opinions(cfg: ExperimentConfig, args) -> object:
    reports = run_many_opinions_check(cfg)
    _emit(reports, cfg, "many_opinions", "json")
    for report in reports:
        _require(
            report.dominance_failures == 0,
            args.check,
            f"n={report.n}: 3-Majority hit kappa after Voter in "
            f"{report.dominance_failures} coupled trials",
        )
        if report.voter_mean is not None and report.voter_expected > 0:
            ratio = report.voter_mean / report.voter_expected
            _require(
                0.5 <= ratio <= 1.5,
                args.check,
                f"n={report.n}: Voter mean hitting time is {ratio:.2f}x the expectation",
            )
    return reports


def cmd_couple(cfg: ExperimentConfig, args) -> object:
    report = run_coupling_check(cfg, duality=not args.skip_duality)
    _emit(report, cfg, "couple", "json")
    _require(report.passed, args.check, "coupled order or Voter/CRW duality failed")
    return report


def cmd_drift_check(cfg: ExperimentConfig, args) -> object:
    report, rows = run_drift_check(cfg)
    write_rows_csv(rows, DRIFT_COLUMNS, _output_path(cfg, "drift.csv"))
    write_json(report, _output_path(cfg, "drift.json"))
    failing = [item.item for item in report.items if not item.passed]
    failing += [result.kind.value for result in report.tail_bounds if not result.passed]
    _require(not failing, args.check, f"drift items failed: {failing}")
    return report


def parse_bound_parameters(pairs: List[str]) -> Dict[str, float]:
    """Turn name=value arguments into calculator keywords"""
    parameters = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"bound parameter {pair!r} is not name=value")
        try:
            parameters[BOUND_PARAMETER_ALIASES.get(name, name)] = float(value)
        except ValueError as e:
            raise ConfigError(f"bound parameter {name}: {e}") from e
    if "T" in parameters:
        parameters["T"] = int(parameters["T"])
    return parameters


def evaluate_bound(kind: str, parameters: Dict[str, float]):
    try:
        calculator = BOUND_CALCULATORS[BoundKind(kind)]
    except ValueError as e:
        raise ConfigError(f"unknown bound {kind!r}") from e
    try:
        return calculator(**parameters)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{kind}: {e}") from e


def cmd_bounds(cfg: Optional[ExperimentConfig], args) -> object:
    return evaluate_bound(args.kind, parse_bound_parameters(args.parameters))


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "lower-bound": cmd_lower_bound,
    "gap": cmd_gap,
    "many-opinions": cmd_many_opinions,
    "couple": cmd_couple,
    "drift-check": cmd_drift_check,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-lab",
        description="Seeded experiments on asynchronous 3-Majority, Voter and 2-Choices",
    )
    parser.add_argument("--config", help="KEY=VALUE experiment file")
    parser.add_argument("--seed", type=int, help="base seed, overrides SEED")
    parser.add_argument("--out", help="output directory, overrides OUT_DIR")
    parser.add_argument("--threads", type=int, help="worker processes, overrides THREADS")
    parser.add_argument("--format", choices=["csv", "json"], default="json")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)

    commands = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "lower-bound", "gap", "many-opinions", "couple", "drift-check"):
        sub = commands.add_parser(name)
        sub.add_argument(
            "--check", action="store_true", help="exit with code 3 when an acceptance window is missed"
        )
        if name == "couple":
            sub.add_argument("--skip-duality", action="store_true")

    bounds = commands.add_parser("bounds", help="evaluate a tail-bound calculator")
    bounds.add_argument("kind", choices=[kind.value for kind in BoundKind])
    bounds.add_argument("parameters", nargs="*", metavar="NAME=VALUE")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = None
        if args.command != "bounds":
            cfg = load_experiment_config(
                args.config,
                seed=args.seed,
                out_dir=args.out or (None if args.config else config.OUTPUT_DIR),
                threads=args.threads or (None if args.config else config.THREADS),
            )
        result = COMMANDS[args.command](cfg, args)
    except LabError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        # invalid input that surfaced past config validation, e.g. bad COUNTS
        logger.error("invalid input: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return ConfigError.exit_code

    print(json.dumps(to_jsonable(result), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
