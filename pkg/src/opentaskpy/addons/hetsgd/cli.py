"""Command line entry point: ``hetsgd run|sweep|bounds|lb-check|data``."""

import argparse
import json
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import replace
from typing import Any

import numpy as np
import opentaskpy.otflogging
from opentaskpy.exceptions import InvalidConfigError

from .exceptions import AcceptanceCheckError, HetSGDError
from .harness.config import ExperimentConfig, load_config, parse_config, serialize_config
from .harness.lbcheck import SUITES, run_lower_bound_checks
from .harness.report import emit_report
from .harness.storage import ArtifactStore, join_location
from .harness.sweep import enumerate_cells, run_algorithm, sweep
from .logreg.cache import encode_cache
from .logreg.pipeline import DEFAULT_COMPONENTS, prepare_idx
from .logreg.surrogate import synth_digits
from .rates import BOUND_TABLES, table_rows

logger = opentaskpy.otflogging.init_logging(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3

PACKAGE_LOGGER = "opentaskpy.addons.hetsgd"


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load(args: argparse.Namespace, store: ArtifactStore) -> ExperimentConfig:
    if not args.config:
        raise InvalidConfigError("--config is required")
    if str(args.config).startswith("s3://"):
        try:
            document = json.loads(store.read_text(args.config))
        except json.JSONDecodeError as ex:
            raise InvalidConfigError(f"{args.config} is not valid JSON: {ex}") from ex
        config = parse_config(document)
    else:
        config = load_config(args.config)
    if args.seed is not None:
        config.master_seed = args.seed
    if getattr(args, "threads", None):
        config.threads = args.threads
    return config


def _cmd_run(args: argparse.Namespace, store: ArtifactStore) -> int:
    config = _load(args, store)
    cells = list(enumerate_cells(replace(config, replicates=1)))
    if len(cells) != 1:
        raise InvalidConfigError(
            f"'run' needs a config describing a single cell, this one has {len(cells)};"
            " use 'sweep' instead"
        )
    sweep_result = sweep(config, threads=1, store=store, keep_results=True)
    runs = [outcome.result.to_dict() for outcome in sweep_result.outcomes if outcome.result]
    text = json.dumps({"config": serialize_config(config), "runs": runs}, indent=2, sort_keys=True, default=_json_default)
    if args.out:
        store.write_text(join_location(args.out, "run.json"), text + "\n")
    else:
        _out(text)
    return EXIT_OK


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, frozenset | set):
        return sorted(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _cmd_sweep(args: argparse.Namespace, store: ArtifactStore) -> int:
    config = _load(args, store)
    result = sweep(config, store=store)
    bounds = [name for name in (args.bounds or "").split(",") if name]
    report = emit_report(result.rows, bounds)
    write_csv = args.csv or not args.json
    write_json = args.json or not args.csv
    targets = dict(config.output)
    if args.out:
        targets = {
            "csv": join_location(args.out, "sweep.csv"),
            "json": join_location(args.out, "report.json"),
        }
    if write_csv:
        if "csv" in targets:
            store.write_text(targets["csv"], result.to_csv())
        else:
            _out(result.to_csv())
    if write_json:
        if "json" in targets:
            store.write_text(targets["json"], report.to_json())
        else:
            _out(report.to_json())
    if bounds and args.out:
        store.write_text(join_location(args.out, "report.csv"), report.to_csv())
    return EXIT_OK


def _parse_values(pairs: Sequence[str]) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for pair in pairs:
        name, sep, raw = pair.partition("=")
        if not sep:
            raise InvalidConfigError(f"expected NAME=VALUE, got '{pair}'")
        try:
            values[name] = float(raw)
        except ValueError as ex:
            raise InvalidConfigError(f"value of '{name}' is not a number: '{raw}'") from ex
    return values


def _cmd_bounds(args: argparse.Namespace, store: ArtifactStore) -> int:
    values = _parse_values(args.values)
    if args.table and not args.json:
        rows = table_rows(values, tuple(args.table))
        lines = ["table,bound,case,value"]
        lines += [f"{row['table']},{row['bound']},{row['case']},{row['value']!r}" for row in rows]
        text, name = "\n".join(lines), "bounds.csv"
    else:
        rows = table_rows(values, tuple(args.table or BOUND_TABLES))
        # non-finite values as text, as in the report
        named = {
            row["bound"]: row["value"] if math.isfinite(row["value"]) else str(row["value"])
            for row in rows
        }
        text, name = json.dumps(named, indent=2), "bounds.json"
    if args.out:
        store.write_text(join_location(args.out, name), text + "\n")
    else:
        _out(text)
    return EXIT_OK


def _cmd_lb_check(args: argparse.Namespace, store: ArtifactStore) -> int:
    outcomes = run_lower_bound_checks(args.suite or None, seed=args.seed or 0)
    text = json.dumps([o.to_dict() for o in outcomes], indent=2, sort_keys=True, default=_json_default)
    if args.out:
        store.write_text(join_location(args.out, "lb_check.json"), text + "\n")
    else:
        _out(text)
    failed = [o.suite for o in outcomes if not o.passed]
    if failed:
        logger.error(f"Failed suites: {failed}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_data(args: argparse.Namespace, store: ArtifactStore) -> int:
    if args.data_command == "prep":
        features, digits = prepare_idx(
            store.read_bytes(args.images), store.read_bytes(args.labels), args.components
        )
    else:
        features, digits = synth_digits(args.seed or 0, args.n_per_digit, args.dim)
    store.write_bytes(args.output, encode_cache(features, digits))
    logger.info(f"Wrote {features.shape[0]} x {features.shape[1]} dataset to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = argparse.ArgumentParser(prog="hetsgd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--seed", type=int, default=None, help="override the master seed")
        sub.add_argument("--out", default=None, help="output directory or s3:// prefix")
        sub.add_argument("--json", action="store_true", help="JSON output")

    run = commands.add_parser("run", help="run a single cell")
    run.add_argument("--config", required=True)
    common(run)
    run.set_defaults(handler=_cmd_run)

    grid = commands.add_parser("sweep", help="run a grid sweep")
    grid.add_argument("--config", required=True)
    grid.add_argument("--threads", type=int, default=None, help="worker threads (speed only)")
    grid.add_argument("--csv", action="store_true", help="CSV output")
    grid.add_argument("--bounds", default=None, help="comma separated bound names for the report")
    common(grid)
    grid.set_defaults(handler=_cmd_sweep)

    bounds = commands.add_parser("bounds", help="evaluate the rate tables, as a JSON name to value object")
    bounds.add_argument("values", nargs="*", help="NAME=VALUE parameters")
    bounds.add_argument(
        "--table", action="append", choices=list(BOUND_TABLES), help="CSV rows of these tables instead"
    )
    common(bounds)
    bounds.set_defaults(handler=_cmd_bounds)

    check = commands.add_parser("lb-check", help="run the lower bound verification suites")
    check.add_argument("--suite", action="append", choices=list(SUITES))
    common(check)
    check.set_defaults(handler=_cmd_lb_check)

    data = commands.add_parser("data", help="prepare datasets")
    data_commands = data.add_subparsers(dest="data_command", required=True)
    prep = data_commands.add_parser("prep", help="IDX files to a PCA-reduced cache")
    prep.add_argument("--images", "--idx-images", dest="images", required=True)
    prep.add_argument("--labels", "--idx-labels", dest="labels", required=True)
    prep.add_argument("--components", "--pca", dest="components", type=int, default=DEFAULT_COMPONENTS)
    prep.add_argument("--output", "--out", dest="output", required=True)
    prep.set_defaults(handler=_cmd_data, seed=None)
    synth = data_commands.add_parser("synth", help="Gaussian surrogate corpus to a cache")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--n-per-digit", type=int, default=200)
    synth.add_argument("--dim", type=int, default=10)
    synth.add_argument("--output", "--out", dest="output", required=True)
    synth.set_defaults(handler=_cmd_data)
    return parser


def _set_verbose() -> None:
    for name in list(logging.root.manager.loggerDict):
        if name.startswith(PACKAGE_LOGGER):
            logging.getLogger(name).setLevel(logging.DEBUG)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        _set_verbose()
    store = ArtifactStore()
    try:
        return int(args.handler(args, store))
    except (InvalidConfigError, json.JSONDecodeError) as ex:
        logger.error(f"Configuration error: {ex}")
        return EXIT_CONFIG
    except AcceptanceCheckError as ex:
        logger.error(str(ex))
        return EXIT_CHECK_FAILED
    except (HetSGDError, ValueError, ArithmeticError, np.linalg.LinAlgError) as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_RUNTIME
    finally:
        store.close()


if __name__ == "__main__":
    sys.exit(main())
