"""Comparison of empirical suboptimality with the rate bounds."""

import csv
import io
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any

import opentaskpy.otflogging

from ..exceptions import MissingParameterError, ParameterMismatchError, ParameterRangeError
from ..rates import BoundSpec, eval_bound, get_bound
from .sweep import CSV_SCHEMA_VERSION, ROW_SUMMARY, format_value

logger = opentaskpy.otflogging.init_logging(__name__)

REPORT_SCHEMA_VERSION = 1
REPORT_COLUMNS = (
    "instance",
    "algo",
    "M",
    "K",
    "R",
    "S",
    "zeta_star_sq",
    "bound",
    "table",
    "case",
    "empirical",
    "bound_value",
    "compliant",
)
# Relative slack when comparing a measured value with a bound
COMPLIANCE_SLACK = 1e-9


@dataclass
class Report:
    """Bound comparisons and ordering verdicts, in input order."""

    comparisons: list[dict[str, Any]] = field(default_factory=list)
    verdicts: list[dict[str, Any]] = field(default_factory=list)
    bounds: list[str] = field(default_factory=list)

    @property
    def compliant(self) -> bool:
        """True when no comparison exceeded its bound."""
        return all(row["compliant"] for row in self.comparisons)

    def to_dict(self) -> dict[str, Any]:
        """JSON form, non-finite floats written as strings."""
        return _jsonable(
            {
                "schema_version": REPORT_SCHEMA_VERSION,
                "csv_schema_version": CSV_SCHEMA_VERSION,
                "bounds": self.bounds,
                "compliant": self.compliant,
                "comparisons": self.comparisons,
                "verdicts": self.verdicts,
            }
        )

    def to_json(self) -> str:
        """Deterministic JSON text."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """One CSV line per comparison."""
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.comparisons:
            writer.writerow({column: format_value(row.get(column)) for column in REPORT_COLUMNS})
        return buffer.getvalue()


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Mapping):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(item) for item in value]
    return value


def _bound_inputs(result: Mapping[str, Any]) -> dict[str, Any]:
    parameters = result.get("parameters")
    if not parameters:
        raise ParameterMismatchError(
            f"result for '{result.get('instance')}' / '{result.get('algo')}' carries no parameters"
        )
    if "M" in parameters and int(parameters["M"]) != int(result["M"]):
        raise ParameterMismatchError(
            f"result M={result['M']} but its parameters describe M={parameters['M']}"
        )
    values = dict(parameters)
    for name in ("M", "K", "R"):
        values[name] = result[name]
    values["S"] = result.get("S") or result["M"]
    return values


def _compare(result: Mapping[str, Any], spec: BoundSpec, c: float) -> dict[str, Any]:
    values = _bound_inputs(result)
    try:
        bound = eval_bound(spec, values, c)
    except MissingParameterError as ex:
        raise ParameterMismatchError(
            f"bound '{spec.name}' needs '{ex.name}', which the results for"
            f" '{result.get('instance')}' do not provide"
        ) from ex
    except ParameterRangeError as ex:
        raise ParameterMismatchError(f"results for '{result.get('instance')}': {ex}") from ex
    empirical = float(result["final_subopt"])
    return {
        "instance": result.get("instance"),
        "algo": result.get("algo"),
        "M": result["M"],
        "K": result["K"],
        "R": result["R"],
        "S": values["S"],
        "zeta_star_sq": result.get("zeta_star_sq"),
        "subopt_mode": result.get("subopt_mode"),
        "optimum_slack": result.get("optimum_slack", 0.0),
        "bound": spec.name,
        "table": spec.table,
        "case": spec.case,
        "empirical": empirical,
        "bound_value": bound,
        "compliant": empirical <= bound * (1 + COMPLIANCE_SLACK),
    }


def ordering_verdicts(results: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Compare every pair of algorithms run on the same instance and geometry."""
    groups: dict[tuple, dict[str, Mapping[str, Any]]] = {}
    for result in results:
        key = (result.get("instance"), result["M"], result["K"], result["R"], result.get("S"))
        groups.setdefault(key, {})[str(result.get("algo"))] = result
    verdicts = []
    for (instance, M, K, R, S), by_algo in groups.items():
        for first, second in combinations(sorted(by_algo), 2):
            a = float(by_algo[first]["final_subopt"])
            b = float(by_algo[second]["final_subopt"])
            relation = ">=" if a >= b else "<"
            zeta_sq = by_algo[first].get("zeta_star_sq")
            verdicts.append(
                {
                    "instance": instance,
                    "M": M,
                    "K": K,
                    "R": R,
                    "S": S,
                    "zeta_star_sq": zeta_sq,
                    "first": first,
                    "second": second,
                    "relation": relation,
                    "first_value": a,
                    "second_value": b,
                    "statement": f"{first} {relation} {second} at zeta_star^2 = {format_value(zeta_sq)}",
                }
            )
    return verdicts


def emit_report(
    results: Sequence[Mapping[str, Any]],
    bounds: Sequence[str | BoundSpec],
    c: float = 1.0,
    summaries_only: bool = True,
) -> Report:
    """Build the comparison of results with the given bounds.

    Args:
        results: Sweep rows carrying their ``parameters``
        bounds: Bound names or rows from ``rates``
        c: Leading constant for symbolic-constant rows
        summaries_only: Ignore ``cell`` rows when summary rows are present

    Returns:
        Report: Comparisons and ordering verdicts

    Raises:
        ParameterMismatchError: A bound needs something the results lack
    """
    specs = [get_bound(bound) if isinstance(bound, str) else bound for bound in bounds]
    rows = list(results)
    if summaries_only and any(row.get("row_type") == ROW_SUMMARY for row in rows):
        rows = [row for row in rows if row.get("row_type") == ROW_SUMMARY]
    comparisons = [_compare(row, spec, c) for row in rows for spec in specs]
    report = Report(comparisons, ordering_verdicts(rows), [spec.name for spec in specs])
    violations = sum(1 for row in comparisons if not row["compliant"])
    if violations:
        logger.info(f"{violations} of {len(comparisons)} comparisons exceed their bound")
    return report
