"""Grid sweeps over instances, geometries, algorithms, stepsizes and replicates.

Every (instance, geometry, algorithm, stepsize, replicate) combination is one
cell. Cells may run on a thread pool but are gathered and written in cell
order, so the output does not depend on the thread count.
"""

import csv
import io
import math
import threading
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any

import numpy as np
import opentaskpy.otflogging
from opentaskpy.exceptions import InvalidConfigError

from ..exceptions import ParameterRangeError, SweepCancelledError
from ..instances import build_chain, build_local_lb, random_quadratic
from ..logreg.cache import decode_cache
from ..logreg.newton import DEFAULT_TOLERANCE
from ..logreg.pipeline import attach_optimum, build_logistic_objective
from ..logreg.surrogate import synth_digits
from ..objective import DistributedObjective
from ..optimizers.acsa import run_acsa, run_multistage_acsa
from ..optimizers.geometry import CommGeometry
from ..optimizers.result import SUBOPT_RAW, RunResult
from ..optimizers.runners import (
    reference_value,
    run_inner_outer,
    run_local_sgd,
    run_minibatch_sgd,
    run_with_subset,
)
from ..optimizers.schedules import (
    CONSTANT,
    STICH,
    THEOREM1_CONVEX,
    THEOREM2_CONVEX,
    ScheduleSpec,
)
from .config import AlgorithmConfig, ExperimentConfig
from .storage import ArtifactStore

logger = opentaskpy.otflogging.init_logging(__name__)

CSV_SCHEMA_VERSION = 2
CSV_COLUMNS = (
    "row_type",
    "instance",
    "algo",
    "M",
    "K",
    "R",
    "S",
    "eta_inner",
    "eta_outer",
    "schedule",
    "seed",
    "replicate",
    "zeta_star_sq",
    "sigma",
    "final_subopt",
    "final_subopt_stderr",
    "rounds_to_tol",
    "subopt_mode",
    "optimum_slack",
    "schema_version",
)
ROW_CELL = "cell"
ROW_SUMMARY = "summary"


@dataclass(frozen=True)
class InstanceVariant:
    """One point of the instance axis (a zeta for local_lb, a p for logistic)."""

    label: str
    params: dict[str, Any]


@dataclass(frozen=True)
class Cell:
    """One run of the grid."""

    variant: InstanceVariant
    geometry: CommGeometry
    algorithm: AlgorithmConfig
    eta_inner: float | None
    eta_outer: float | None
    replicate: int

    @property
    def group(self) -> tuple:
        """Key of the summary group this cell belongs to."""
        g = self.geometry
        return (self.variant.label, self.algorithm.label, g.M, g.K, g.R, g.S)

    @property
    def stepsize_key(self) -> tuple[float, float]:
        """Ordering key used to break ties toward the smaller stepsize."""
        return (self.eta_outer or 0.0, self.eta_inner or 0.0)


@dataclass
class CellOutcome:
    """The numbers a cell contributes to the CSV."""

    cell: Cell
    final_subopt: float
    rounds_to_tol: int | None
    subopt_mode: str
    zeta_star_sq: float
    sigma: float
    parameters: dict[str, float] = field(default_factory=dict)
    result: RunResult | None = None
    optimum_slack: float = 0.0


@dataclass
class SweepResult:
    """Cell outcomes, summary rows and the CSV rows in emission order."""

    outcomes: list[CellOutcome]
    summaries: list[dict[str, Any]]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        """Render the rows as CSV text."""
        return rows_to_csv(self.rows)


def instance_variants(instance: dict[str, Any]) -> list[InstanceVariant]:
    """Expand ``zeta_values``/``p_values`` into one variant per value."""
    params = dict(instance)
    family = params["family"]
    if family == "local_lb" and "zeta_values" in params:
        values = params.pop("zeta_values")
        return [InstanceVariant(f"local_lb:zeta={v:g}", {**params, "zeta": v}) for v in values]
    if family == "logistic" and "p_values" in params:
        values = params.pop("p_values")
        return [InstanceVariant(f"logistic:p={v:g}", {**params, "p": v}) for v in values]
    if family == "local_lb":
        return [InstanceVariant(f"local_lb:zeta={params['zeta']:g}", params)]
    if family == "logistic":
        return [InstanceVariant(f"logistic:p={params['p']:g}", params)]
    return [InstanceVariant(family, params)]


class InstanceFactory:
    """Builds and caches the objective for each (variant, M, R)."""

    def __init__(self, master_seed: int, store: ArtifactStore | None = None):
        """Start with an empty cache.

        Args:
            master_seed: Default seed for generated data
            store: Where ``cache`` datasets are read from
        """
        self.master_seed = master_seed
        self.store = store or ArtifactStore()
        self._objectives: dict[tuple, DistributedObjective] = {}
        self._datasets: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _dataset(self, params: dict[str, Any]) -> tuple[np.ndarray, np.ndarray]:
        if "cache" in params:
            key = f"cache:{params['cache']}"
            if key not in self._datasets:
                self._datasets[key] = decode_cache(self.store.read_bytes(params["cache"]))
            return self._datasets[key]
        surrogate = {"seed": self.master_seed, **params["surrogate"]}
        key = f"surrogate:{sorted(surrogate.items())}"
        if key not in self._datasets:
            self._datasets[key] = synth_digits(**surrogate)
        return self._datasets[key]

    def _build(self, params: dict[str, Any], M: int, R: int) -> DistributedObjective:
        family = params["family"]
        if family == "local_lb":
            return build_local_lb(
                params["H"], params["lam"], params["mu"], params["L"], params["zeta"],
                params.get("sigma", 0.0), params.get("B"), params.get("Delta"), machines=M,
            )
        if family == "chain":
            return build_chain(params["H"], params["lam"], params["C"], R, machines=M)
        if family == "quadratic":
            options = {key: value for key, value in params.items() if key not in ("family", "seed", "index")}
            return random_quadratic(
                params.get("seed", self.master_seed), params.get("index", 0), machines=M, **options
            )
        features, digits = self._dataset(params)
        objective, _ = build_logistic_objective(
            features,
            digits,
            params["p"],
            params.get("split_seed", self.master_seed),
            params.get("n_per_digit"),
            M,
            params.get("ridge", 0.0),
            params.get("batch_size"),
        )
        return attach_optimum(objective, params.get("newton_tol", DEFAULT_TOLERANCE))

    def get(self, variant: InstanceVariant, M: int, R: int) -> DistributedObjective:
        """Return the (cached) objective for this variant and geometry."""
        key = (variant.label, M, R if variant.params["family"] == "chain" else None)
        if key not in self._objectives:
            try:
                self._objectives[key] = self._build(variant.params, M, R)
            except ParameterRangeError as ex:
                raise InvalidConfigError(f"Instance '{variant.label}' with M={M}: {ex}") from ex
            logger.info(f"Built instance {variant.label} for M={M}")
        return self._objectives[key]


def _schedule(algorithm: AlgorithmConfig, obj: DistributedObjective, geom: CommGeometry, eta: float | None) -> ScheduleSpec:
    kind = algorithm.schedule
    constants = obj.constants
    if kind == CONSTANT:
        assert eta is not None
        return ScheduleSpec.constant(eta)
    if kind == STICH:
        return ScheduleSpec.stich(constants.H, constants.lam, geom.R)
    if kind in (THEOREM1_CONVEX, THEOREM2_CONVEX) and constants.B is None:
        raise ParameterRangeError(f"schedule '{kind}' needs the radius B")
    if kind == THEOREM1_CONVEX:
        assert constants.B is not None
        return ScheduleSpec.theorem1_convex(
            constants.H, constants.B, constants.sigma_star, geom.M, geom.K, geom.R
        )
    if kind == THEOREM2_CONVEX:
        assert constants.B is not None
        return ScheduleSpec.theorem2_convex(
            constants.H, constants.B, constants.sigma, constants.sigma_star,
            constants.zeta_bar, geom.M, geom.K, geom.R,
        )
    return ScheduleSpec.theorem2_strongly_convex(constants.H, constants.lam)


def run_algorithm(
    algorithm: AlgorithmConfig,
    obj: DistributedObjective,
    geom: CommGeometry,
    seed: int,
    replicate: int,
    eta_inner: float | None = None,
    eta_outer: float | None = None,
    record_history: bool = False,
) -> RunResult:
    """Dispatch one run to the right optimizer."""
    common: dict[str, Any] = {"replicate": replicate, "record_history": record_history}
    if algorithm.algo == "minibatch":
        sched = _schedule(algorithm, obj, geom, eta_outer)
        return run_with_subset(
            run_minibatch_sgd, obj, geom, seed, sched=sched, averaging=algorithm.averaging, **common
        )
    if algorithm.algo == "local":
        sched = _schedule(algorithm, obj, geom, eta_outer)
        return run_with_subset(
            run_local_sgd, obj, geom, seed, sched=sched, averaging=algorithm.averaging, **common
        )
    if algorithm.algo == "inner_outer":
        assert eta_inner is not None and eta_outer is not None
        return run_with_subset(
            run_inner_outer, obj, geom, seed, eta_inner=eta_inner, eta_outer=eta_outer,
            averaging=algorithm.averaging, **common,
        )
    if algorithm.algo == "acsa":
        return run_acsa(obj, geom, algorithm.regularize, seed, **common)
    Delta = algorithm.Delta if algorithm.Delta is not None else obj.constants.Delta
    if Delta is None:
        raise ParameterRangeError("multistage_acsa needs Delta, set it on the algorithm block")
    return run_multistage_acsa(obj, geom, Delta, seed, **common)


def _stepsize_points(algorithm: AlgorithmConfig) -> list[tuple[float | None, float | None]]:
    if algorithm.algo == "inner_outer":
        assert algorithm.eta_inner is not None and algorithm.eta_outer is not None
        return [
            (inner, outer)
            for outer in algorithm.eta_outer.points()
            for inner in algorithm.eta_inner.points()
        ]
    if algorithm.stepsizes is not None and algorithm.schedule == CONSTANT:
        return [(None, eta) for eta in algorithm.stepsizes.points()]
    return [(None, None)]


def enumerate_cells(config: ExperimentConfig) -> Iterator[Cell]:
    """Yield every cell in emission order."""
    grid = config.geometry
    for variant in instance_variants(config.instance):
        for M, K, R, S in product(grid.M, grid.K, grid.R, grid.S):
            geometry = CommGeometry(M, K, R, S)
            for algorithm in config.algorithms:
                for eta_inner, eta_outer in _stepsize_points(algorithm):
                    for replicate in range(config.replicates):
                        yield Cell(variant, geometry, algorithm, eta_inner, eta_outer, replicate)


def _run_cell(
    cell: Cell,
    obj: DistributedObjective,
    config: ExperimentConfig,
    keep_results: bool,
) -> CellOutcome:
    with np.errstate(over="ignore", invalid="ignore"):
        result = run_algorithm(
            cell.algorithm, obj, cell.geometry, config.master_seed, cell.replicate,
            cell.eta_inner, cell.eta_outer,
        )
    rounds = None
    if result.subopt_mode != SUBOPT_RAW:
        f_star, _ = reference_value(obj, result.optimal_value)
        gap = obj.value(np.zeros(obj.dimension)) - f_star
        rounds = result.rounds_to_tol(config.tolerance_factor * gap)
    constants = obj.constants
    final = result.final_suboptimality
    return CellOutcome(
        cell=cell,
        final_subopt=final if math.isfinite(final) else math.inf,
        rounds_to_tol=rounds,
        subopt_mode=result.subopt_mode,
        zeta_star_sq=constants.zeta_star**2,
        sigma=constants.sigma,
        parameters=constants.bound_values(),
        result=result if keep_results else None,
        optimum_slack=float(result.extras.get("optimum_slack", 0.0)),
    )


def _cell_row(outcome: CellOutcome, seed: int) -> dict[str, Any]:
    cell = outcome.cell
    g = cell.geometry
    return {
        "row_type": ROW_CELL,
        "instance": cell.variant.label,
        "algo": cell.algorithm.label,
        "M": g.M,
        "K": g.K,
        "R": g.R,
        "S": g.S,
        "eta_inner": cell.eta_inner,
        "eta_outer": cell.eta_outer,
        "schedule": cell.algorithm.schedule,
        "seed": seed,
        "replicate": cell.replicate,
        "zeta_star_sq": outcome.zeta_star_sq,
        "sigma": outcome.sigma,
        "final_subopt": outcome.final_subopt,
        "final_subopt_stderr": None,
        "rounds_to_tol": outcome.rounds_to_tol,
        "subopt_mode": outcome.subopt_mode,
        "optimum_slack": outcome.optimum_slack,
        "schema_version": CSV_SCHEMA_VERSION,
        # not a CSV column; carried for the report
        "parameters": outcome.parameters,
    }


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    data = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        return math.inf, math.inf
    mean = float(math.fsum(values) / len(values))
    if len(values) == 1:
        return mean, 0.0
    return mean, float(np.std(data, ddof=1) / math.sqrt(len(values)))


def summarize(outcomes: list[CellOutcome], seed: int) -> list[dict[str, Any]]:
    """Pick the best stepsize of each group by mean final suboptimality.

    Ties go to the smaller stepsize (outer first, then inner).
    """
    groups: dict[tuple, dict[tuple, list[CellOutcome]]] = {}
    for outcome in outcomes:
        by_step = groups.setdefault(outcome.cell.group, {})
        by_step.setdefault(outcome.cell.stepsize_key, []).append(outcome)

    summaries = []
    for group, by_step in groups.items():
        best_key = None
        best_mean = math.inf
        best_stderr = math.inf
        for key in sorted(by_step):
            mean, stderr = _mean_stderr([o.final_subopt for o in by_step[key]])
            if best_key is None or mean < best_mean:
                best_key, best_mean, best_stderr = key, mean, stderr
        assert best_key is not None
        chosen = by_step[best_key]
        logger.log(
            12,
            f"Best stepsize for {group}: eta_outer={best_key[0]:g}, eta_inner={best_key[1]:g}"
            f" (mean {best_mean:.6g})",
        )
        reached = [o.rounds_to_tol for o in chosen]
        row = _cell_row(chosen[0], seed)
        row.update(
            {
                "row_type": ROW_SUMMARY,
                "replicate": None,
                "final_subopt": best_mean,
                "final_subopt_stderr": best_stderr,
                "rounds_to_tol": None if None in reached else max(reached),  # type: ignore[type-var]
            }
        )
        summaries.append(row)
    return summaries


def format_value(value: Any) -> str:
    """Render a CSV field: empty for None, shortest round-trip repr for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float | np.floating):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    """CSV text: the header line and the rows."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: format_value(row.get(column)) for column in CSV_COLUMNS})
    return buffer.getvalue()


def sweep(
    config: ExperimentConfig,
    threads: int | None = None,
    cancel: threading.Event | None = None,
    store: ArtifactStore | None = None,
    keep_results: bool = False,
    on_cell: Callable[[CellOutcome], None] | None = None,
) -> SweepResult:
    """Run every cell of the experiment and build the CSV rows.

    Rows are the cell rows in cell order followed by one summary row per
    (instance, algorithm, geometry) group.

    Args:
        config: The parsed experiment
        threads: Worker threads, the config's value when None
        cancel: Set to stop before the next cell starts
        store: Artifact store for dataset caches
        keep_results: Keep each RunResult on its outcome
        on_cell: Called with every finished outcome, in cell order

    Returns:
        SweepResult: Outcomes, summaries and rows

    Raises:
        InvalidConfigError: An instance cannot be built from the config
        SweepCancelledError: ``cancel`` was set
    """
    workers = threads or config.threads
    cells = list(enumerate_cells(config))
    factory = InstanceFactory(config.master_seed, store)
    # build every instance before the first run
    objectives = [factory.get(cell.variant, cell.geometry.M, cell.geometry.R) for cell in cells]
    logger.info(f"Sweep '{config.name}': {len(cells)} cells on {workers} thread(s)")

    def work(index: int) -> CellOutcome | None:
        if cancel is not None and cancel.is_set():
            return None
        return _run_cell(cells[index], objectives[index], config, keep_results)

    outcomes: list[CellOutcome] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for outcome in pool.map(work, range(len(cells))):
            if outcome is None:
                pool.shutdown(wait=False, cancel_futures=True)
                raise SweepCancelledError(
                    f"sweep '{config.name}' cancelled after {len(outcomes)} of {len(cells)} cells"
                )
            outcomes.append(outcome)
            if on_cell is not None:
                on_cell(outcome)
            if len(outcomes) % 50 == 0:
                logger.info(f"Finished {len(outcomes)} of {len(cells)} cells")

    cell_rows = [_cell_row(outcome, config.master_seed) for outcome in outcomes]
    summaries = summarize(outcomes, config.master_seed)
    return SweepResult(outcomes, summaries, cell_rows + summaries)
