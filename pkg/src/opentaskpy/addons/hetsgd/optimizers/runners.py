"""Minibatch SGD, Local SGD, the inner/outer update and subset participation."""

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
import opentaskpy.otflogging

from ..exceptions import ContractViolationError, ParameterRangeError
from ..objective import DistributedObjective
from ..rng import provenance
from .engine import RoundTrace, StepRule, run_rounds
from .geometry import CommGeometry
from .result import SUBOPT_RAW, RunResult
from .schedules import ScheduleSpec

logger = opentaskpy.otflogging.init_logging(__name__)

AVERAGING_WEIGHTED = "weighted"
AVERAGING_LAST = "last"
AVERAGING_MODES = (AVERAGING_WEIGHTED, AVERAGING_LAST)

# Relative slack on the 1/(4H) stepsize cap
_COMPLIANCE_SLACK = 1e-12


def reference_value(
    obj: DistributedObjective, optimal_value: float | None = None
) -> tuple[float, str]:
    """Return (F*, mode) used to turn F values into suboptimality.

    An explicitly supplied value wins, then the objective's own optimum less its
    ``optimum_slack``. With neither, raw F values are reported and the mode is
    ``raw``.
    """
    if optimal_value is not None:
        return float(optimal_value), obj.optimum_source
    known = obj.known_optimal_value
    if known is not None:
        return float(known) - obj.optimum_slack, obj.optimum_source
    return 0.0, SUBOPT_RAW


def optimum_slack(obj: DistributedObjective, optimal_value: float | None = None) -> float:
    """The slack ``reference_value`` took off the objective's optimum, 0 for explicit values."""
    return 0.0 if optimal_value is not None else float(obj.optimum_slack)


def _initial_point(obj: DistributedObjective, x0: Sequence[float] | np.ndarray | None) -> np.ndarray:
    if x0 is None:
        return np.zeros(obj.dimension)
    return obj.check_point(x0)


def _finish(
    obj: DistributedObjective,
    geom: CommGeometry,
    trace: RoundTrace,
    averaging: str,
    seed: int,
    replicate: int,
    optimal_value: float | None,
    record_history: bool,
    config: dict[str, Any],
) -> RunResult:
    if averaging not in AVERAGING_MODES:
        raise ParameterRangeError(f"unknown averaging '{averaging}', expected one of {AVERAGING_MODES}")
    f_star, mode = reference_value(obj, optimal_value)
    series = np.array([obj.value(x) - f_star for x in trace.iterates[1:]], dtype=np.float64)
    if geom.R == 0 or averaging == AVERAGING_LAST:
        final_point = trace.iterates[-1]
    elif trace.total_weight > 0:
        final_point = trace.weighted_sum / trace.total_weight
    else:
        raise ContractViolationError("averaging weights sum to zero")
    final_subopt = obj.value(final_point) - f_star
    logger.info(
        f"Finished {config['algo']} with M={geom.M} K={geom.K} R={geom.R} S={geom.S}:"
        f" final suboptimality {final_subopt:.6g} ({mode})"
    )
    tracker = trace.tracker
    return RunResult(
        final_point=final_point,
        final_suboptimality=float(final_subopt),
        suboptimality_series=series,
        iterate_history=np.array(trace.iterates) if record_history else None,
        support_history=None if tracker is None else tracker.rounds,
        communicated_support=None if tracker is None else tracker.communicated,
        step_history=np.array(trace.steps) if trace.steps else None,
        config={**config, "geometry": geom.to_dict(), "averaging": averaging, "instance": obj.describe()},
        rng=provenance(seed, replicate),
        optimal_value=None if mode == SUBOPT_RAW else f_star,
        subopt_mode=mode,
        extras={
            "total_weight": trace.total_weight,
            "optimum_slack": optimum_slack(obj, optimal_value),
        },
    )


def run_minibatch_sgd(
    obj: DistributedObjective,
    geom: CommGeometry,
    sched: ScheduleSpec,
    seed: int,
    replicate: int = 0,
    x0: Sequence[float] | np.ndarray | None = None,
    averaging: str = AVERAGING_WEIGHTED,
    optimal_value: float | None = None,
    theorem_compliance: bool = False,
    record_support: bool = False,
    record_steps: bool = False,
    record_history: bool = True,
    workers: int = 1,
) -> RunResult:
    """Minibatch SGD: x_{r+1} = x_r - eta_r g_r with g_r an M K sample minibatch gradient.

    The weighted output averages the query points x_0..x_{R-1} with the
    schedule weights w_r.

    Args:
        obj: The objective
        geom: Communication geometry
        sched: Stepsize schedule indexed by round
        seed: Master seed
        replicate: Replicate index
        x0: Initial point, zero by default
        averaging: ``weighted`` or ``last``
        optimal_value: F* override
        theorem_compliance: Reject stepsizes above 1/(4H)
        record_support: Keep per-round supports
        record_steps: Keep per-step points
        record_history: Keep the consensus iterates
        workers: Threads for the per-machine loops

    Returns:
        RunResult: The run
    """
    if theorem_compliance:
        cap = 1 / (4 * obj.constants.H)
        for r in range(geom.R):
            if sched.stepsize(r) > cap * (1 + _COMPLIANCE_SLACK):
                raise ParameterRangeError(
                    f"stepsize {sched.stepsize(r)} at round {r} exceeds 1/(4H) = {cap}"
                )
    K = geom.K
    rule = StepRule(
        inner=lambda r, k: 0.0,
        outer=lambda r, k: sched.stepsize(r) / K,
        average_weight=lambda r, k: sched.weight(r) if k == 0 else 0.0,
    )
    trace = run_rounds(
        obj, geom, rule, seed, _initial_point(obj, x0), replicate,
        record_support, record_steps, workers,
    )
    return _finish(
        obj, geom, trace, averaging, seed, replicate, optimal_value, record_history,
        {"algo": "minibatch", "schedule": sched.to_dict()},
    )


def run_local_sgd(
    obj: DistributedObjective,
    geom: CommGeometry,
    sched: ScheduleSpec,
    seed: int,
    replicate: int = 0,
    x0: Sequence[float] | np.ndarray | None = None,
    averaging: str = AVERAGING_WEIGHTED,
    optimal_value: float | None = None,
    record_support: bool = False,
    record_steps: bool = False,
    record_history: bool = True,
    workers: int = 1,
) -> RunResult:
    """Local SGD: K local steps per machine, then average the local iterates.

    The schedule is indexed by the global step t = r K + k, and the weighted
    output averages the machine-averaged point of every step with w_t.
    """
    K = geom.K
    rule = StepRule(
        inner=lambda r, k: sched.stepsize(r * K + k),
        outer=lambda r, k: sched.stepsize(r * K + k),
        average_weight=lambda r, k: sched.weight(r * K + k),
    )
    trace = run_rounds(
        obj, geom, rule, seed, _initial_point(obj, x0), replicate,
        record_support, record_steps, workers,
    )
    return _finish(
        obj, geom, trace, averaging, seed, replicate, optimal_value, record_history,
        {"algo": "local", "schedule": sched.to_dict()},
    )


def run_inner_outer(
    obj: DistributedObjective,
    geom: CommGeometry,
    eta_inner: float,
    eta_outer: float,
    seed: int,
    replicate: int = 0,
    x0: Sequence[float] | np.ndarray | None = None,
    averaging: str = AVERAGING_WEIGHTED,
    optimal_value: float | None = None,
    record_support: bool = False,
    record_steps: bool = False,
    record_history: bool = True,
    workers: int = 1,
) -> RunResult:
    """Local steps with ``eta_inner``, consensus update x_{r+1} = x_r - eta_outer (1/S) sum of all local gradients.

    ``eta_inner = 0`` is Minibatch SGD with per-round stepsize K eta_outer and
    ``eta_inner = eta_outer`` is Local SGD with that constant stepsize.
    """
    if eta_inner < 0 or eta_outer < 0:
        raise ParameterRangeError(
            f"stepsizes must be non-negative, got eta_inner={eta_inner}, eta_outer={eta_outer}"
        )

    def weight(_round: int, step: int) -> float:
        # with eta_inner = 0 every step of a round queries x_r
        return 1.0 if eta_inner > 0 or step == 0 else 0.0

    rule = StepRule(
        inner=lambda r, k: eta_inner,
        outer=lambda r, k: eta_outer,
        average_weight=weight,
    )
    trace = run_rounds(
        obj, geom, rule, seed, _initial_point(obj, x0), replicate,
        record_support, record_steps, workers,
    )
    return _finish(
        obj, geom, trace, averaging, seed, replicate, optimal_value, record_history,
        {"algo": "inner_outer", "eta_inner": eta_inner, "eta_outer": eta_outer},
    )


def run_with_subset(
    runner: Callable[..., RunResult],
    obj: DistributedObjective,
    geom: CommGeometry,
    seed: int,
    **kwargs: Any,
) -> RunResult:
    """Run ``runner`` with S of M machines sampled without replacement each round.

    Args:
        runner: Any runner of this package
        obj: The objective
        geom: Geometry carrying S
        seed: Master seed
        **kwargs: Remaining runner arguments (schedule, stepsizes, ...)

    Returns:
        RunResult: The run, with ``config["S"]`` set
    """
    if geom.S is None or not 1 <= geom.S <= geom.M:
        raise ParameterRangeError(f"S must lie in 1..{geom.M}, got {geom.S}")
    if geom.S < geom.M:
        logger.info(f"Sampling {geom.S} of {geom.M} machines per round")
    result = runner(obj, geom, seed=seed, **kwargs)
    result.config["S"] = geom.S
    return result
