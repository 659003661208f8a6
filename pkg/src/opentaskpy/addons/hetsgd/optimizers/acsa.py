"""Accelerated stochastic approximation (AC-SA) on minibatch gradients.

Each iteration uses one communication round: the participating machines
evaluate K stochastic gradients at the shared point x_md and the round
average is the oracle answer.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import opentaskpy.otflogging

from ..exceptions import ParameterRangeError
from ..harness.support import SupportTracker
from ..objective import DistributedObjective, minibatch_gradient
from ..rng import provenance
from .engine import round_participants
from .geometry import CommGeometry
from .result import SUBOPT_RAW, RunResult
from .runners import optimum_slack, reference_value

logger = opentaskpy.otflogging.init_logging(__name__)


@dataclass
class _AcsaState:
    x: np.ndarray
    x_ag: np.ndarray
    round_index: int


def acsa_phi(H: float, lam: float, noise_variance: float, gap: float, iterations: int) -> float:
    """Return max{2H, [lam s^2 / (3 V N(N+1)(N+2))]^(1/2)} for gap V and N iterations."""
    if lam <= 0 or gap <= 0 or noise_variance <= 0 or iterations < 1:
        return 2 * H
    N = iterations
    return max(2 * H, math.sqrt(lam * noise_variance / (3 * gap * N * (N + 1) * (N + 2))))


def multistage_length(H: float, lam: float, noise_variance: float, Delta: float, stage: int) -> int:
    """N_k = ceil(max{4 sqrt(2H/lam), 128 s^2 / (3 lam Delta 2^-(k+1))})."""
    target = Delta * 2.0 ** (-(stage + 1))
    return math.ceil(max(4 * math.sqrt(2 * H / lam), 128 * noise_variance / (3 * lam * target)))


def multistage_phi(
    H: float, lam: float, noise_variance: float, Delta: float, stage: int, length: int
) -> float:
    """phi_k = max{2H, [lam s^2 / (3 Delta 2^-(k-1) N_k(N_k+1)(N_k+2))]^(1/2)}."""
    return acsa_phi(H, lam, noise_variance, Delta * 2.0 ** (-(stage - 1)), length)


def _acsa_iterations(
    obj: DistributedObjective,
    geom: CommGeometry,
    state: _AcsaState,
    iterations: int,
    phi: float,
    lam: float,
    rho: float,
    anchor: np.ndarray,
    seed: int,
    replicate: int,
    f_star: float,
    series: list[float],
    history: list[np.ndarray] | None,
    tracker: SupportTracker | None,
) -> None:
    # the stage restarts t at 1 from x = x_ag = the warm start
    for t in range(1, iterations + 1):
        alpha = 2 / (t + 1)
        gamma = 4 * phi / (t * (t + 1))
        denominator = gamma + (1 - alpha * alpha) * lam
        x_md = ((1 - alpha) * (lam + gamma) / denominator) * state.x_ag + (
            alpha * ((1 - alpha) * lam + gamma) / denominator
        ) * state.x
        participants = round_participants(geom, seed, replicate, state.round_index)
        machines = None if geom.full_participation else participants
        gradient = minibatch_gradient(
            obj, x_md, geom.K, seed, replicate, state.round_index, machines
        )
        if rho:
            gradient = gradient + rho * (x_md - anchor)
        state.x = (
            alpha * lam * x_md + ((1 - alpha) * lam + gamma) * state.x - alpha * gradient
        ) / (lam + gamma)
        state.x_ag = alpha * state.x + (1 - alpha) * state.x_ag
        state.round_index += 1
        series.append(obj.value(state.x_ag) - f_star)
        if history is not None:
            history.append(state.x_ag)
        if tracker is not None:
            tracker.start_round()
            for machine in participants:
                tracker.observe(machine, x_md)
            tracker.end_round(state.x_ag)


def _result(
    obj: DistributedObjective,
    geom: CommGeometry,
    state: _AcsaState,
    series: list[float],
    history: list[np.ndarray] | None,
    tracker: SupportTracker | None,
    f_star: float,
    mode: str,
    seed: int,
    replicate: int,
    config: dict,
    extras: dict,
) -> RunResult:
    final_subopt = obj.value(state.x_ag) - f_star
    logger.info(
        f"Finished {config['algo']} with M={geom.M} K={geom.K} R={geom.R} S={geom.S}:"
        f" final suboptimality {final_subopt:.6g} ({mode})"
    )
    return RunResult(
        final_point=state.x_ag,
        final_suboptimality=float(final_subopt),
        suboptimality_series=np.array(series, dtype=np.float64),
        iterate_history=None if history is None else np.array(history),
        support_history=None if tracker is None else tracker.rounds,
        communicated_support=None if tracker is None else tracker.communicated,
        config={**config, "geometry": geom.to_dict(), "instance": obj.describe()},
        rng=provenance(seed, replicate),
        optimal_value=None if mode == SUBOPT_RAW else f_star,
        subopt_mode=mode,
        extras=extras,
    )


def run_acsa(
    obj: DistributedObjective,
    geom: CommGeometry,
    regularize: bool,
    seed: int,
    replicate: int = 0,
    x0: Sequence[float] | np.ndarray | None = None,
    optimal_value: float | None = None,
    record_support: bool = False,
    record_history: bool = True,
) -> RunResult:
    """Run R iterations of AC-SA and return x_ag after the last one.

    With ``regularize`` the oracle answers for F(x) + (rho/2)||x - x0||^2,
    rho = sigma/(B sqrt(MKR)), which makes weakly convex problems strongly
    convex. Suboptimality is always reported for the unregularized F.

    Args:
        obj: The objective
        geom: Communication geometry
        regularize: Add the proximity term
        seed: Master seed
        replicate: Replicate index
        x0: Initial point, zero by default
        optimal_value: F* override
        record_support: Keep per-round supports
        record_history: Keep the x_ag iterates

    Returns:
        RunResult: The run
    """
    constants = obj.constants
    if constants.lam <= 0 and not regularize:
        raise ParameterRangeError("run_acsa needs lambda > 0 unless regularize is set")
    start = np.zeros(obj.dimension) if x0 is None else obj.check_point(x0)
    rho = 0.0
    if regularize:
        if constants.B is None:
            raise ParameterRangeError("regularized AC-SA needs the radius B")
        if constants.sigma > 0 and geom.R > 0:
            rho = constants.sigma / (constants.B * math.sqrt(geom.M * geom.K * geom.R))
    lam = constants.lam + rho
    noise_variance = constants.sigma**2 / (geom.participants * geom.K)
    gap = constants.Delta
    if gap is None:
        gap = constants.H * (constants.B or 1.0) ** 2 / 2
    phi = acsa_phi(constants.H + rho, lam, noise_variance, gap, geom.R)
    logger.debug(f"AC-SA with phi={phi}, lambda={lam}, rho={rho}")

    f_star, mode = reference_value(obj, optimal_value)
    state = _AcsaState(start.copy(), start.copy(), 0)
    series: list[float] = []
    history = [state.x_ag] if record_history else None
    tracker = SupportTracker(geom.M) if record_support else None
    _acsa_iterations(
        obj, geom, state, geom.R, phi, lam, rho, start, seed, replicate,
        f_star, series, history, tracker,
    )
    return _result(
        obj, geom, state, series, history, tracker, f_star, mode, seed, replicate,
        {"algo": "acsa", "regularize": regularize},
        {"phi": phi, "rho": rho, "optimum_slack": optimum_slack(obj, optimal_value)},
    )


def run_multistage_acsa(
    obj: DistributedObjective,
    geom: CommGeometry,
    Delta: float,
    seed: int,
    replicate: int = 0,
    x0: Sequence[float] | np.ndarray | None = None,
    optimal_value: float | None = None,
    record_support: bool = False,
    record_history: bool = True,
) -> RunResult:
    """Restarted AC-SA with geometrically shrinking target accuracy.

    Stage k runs N_k iterations from the previous stage's x_ag. Stages are
    taken until the R rounds are used up; the last one is cut at the budget.
    ``extras["stages"]`` lists the (N_k, iterations run, phi_k) of each stage.
    """
    constants = obj.constants
    if constants.lam <= 0:
        raise ParameterRangeError("run_multistage_acsa needs lambda > 0")
    if Delta <= 0:
        raise ParameterRangeError(f"Delta must be positive, got {Delta}")
    start = np.zeros(obj.dimension) if x0 is None else obj.check_point(x0)
    noise_variance = constants.sigma**2 / (geom.participants * geom.K)

    f_star, mode = reference_value(obj, optimal_value)
    state = _AcsaState(start.copy(), start.copy(), 0)
    series: list[float] = []
    history = [state.x_ag] if record_history else None
    tracker = SupportTracker(geom.M) if record_support else None
    stages: list[dict] = []
    stage = 1
    while state.round_index < geom.R:
        length = multistage_length(constants.H, constants.lam, noise_variance, Delta, stage)
        phi = multistage_phi(constants.H, constants.lam, noise_variance, Delta, stage, length)
        iterations = min(length, geom.R - state.round_index)
        logger.debug(f"AC-SA stage {stage}: N={length}, running {iterations}, phi={phi}")
        state.x = state.x_ag.copy()
        _acsa_iterations(
            obj, geom, state, iterations, phi, constants.lam, 0.0, start, seed, replicate,
            f_star, series, history, tracker,
        )
        stages.append({"stage": stage, "length": length, "iterations": iterations, "phi": phi})
        stage += 1
    return _result(
        obj, geom, state, series, history, tracker, f_star, mode, seed, replicate,
        {"algo": "multistage_acsa", "Delta": Delta},
        {"stages": stages, "optimum_slack": optimum_slack(obj, optimal_value)},
    )
