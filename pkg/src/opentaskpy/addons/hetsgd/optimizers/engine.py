"""Round engine shared by Minibatch SGD, Local SGD and the inner/outer update.

Machine m in round r starts from the consensus iterate x_r and takes K steps::

    y_k = x_r + delta_k
    g_k = stochastic gradient of F_m at y_k
    direction += outer(r, k) * g_k
    delta_{k+1} = delta_k - inner(r, k) * g_k

and the round ends with x_{r+1} = x_r - (1/S) sum_m direction_m. Minibatch SGD
has ``inner = 0``; Local SGD has ``inner = outer``.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import opentaskpy.otflogging

from ..exceptions import ParameterRangeError
from ..harness.support import SupportTracker, support_of
from ..objective import DistributedObjective
from ..rng import RngStream, StreamPurpose
from .geometry import CommGeometry

logger = opentaskpy.otflogging.init_logging(__name__)

StepFunction = Callable[[int, int], float]


@dataclass(frozen=True)
class StepRule:
    """Per-step coefficients, each a function of (round, local step)."""

    inner: StepFunction
    outer: StepFunction
    average_weight: StepFunction


@dataclass
class RoundTrace:
    """Everything the round loop produced."""

    iterates: list[np.ndarray]
    weighted_sum: np.ndarray
    total_weight: float
    tracker: SupportTracker | None = None
    steps: list[np.ndarray] = field(default_factory=list)


@dataclass
class _MachineRound:
    direction: np.ndarray
    weighted: np.ndarray
    support: frozenset[int] = frozenset()
    steps: list[np.ndarray] = field(default_factory=list)


def round_participants(
    geom: CommGeometry, seed: int, replicate: int, round_index: int
) -> list[int]:
    """Machines taking part in a round, in increasing index order.

    With S = M every machine takes part and no randomness is consumed.
    """
    if geom.full_participation:
        return list(range(geom.M))
    stream = RngStream(seed, replicate, 0, round_index, StreamPurpose.PARTICIPATION)
    return [int(machine) for machine in stream.sample_without_replacement(geom.M, geom.participants)]


def _run_machine(
    obj: DistributedObjective,
    machine: int,
    start: np.ndarray,
    round_index: int,
    K: int,
    rule: StepRule,
    seed: int,
    replicate: int,
    track_support: bool,
    record_steps: bool,
) -> _MachineRound:
    stream = RngStream(seed, replicate, machine, round_index)
    samples = obj.draw_samples(machine, stream, K)
    delta = np.zeros(obj.dimension)
    direction = np.zeros(obj.dimension)
    weighted = np.zeros(obj.dimension)
    support: set[int] = set()
    steps: list[np.ndarray] = []
    for k in range(K):
        point = start + delta
        weight = rule.average_weight(round_index, k)
        if weight:
            weighted = weighted + weight * delta
        sample = None if samples is None else samples[k]
        gradient = obj.stochastic_gradient(machine, point, sample)
        direction = direction + rule.outer(round_index, k) * gradient
        delta = delta - rule.inner(round_index, k) * gradient
        if track_support:
            support |= support_of(point)
        if record_steps:
            steps.append(point)
    if track_support:
        support |= support_of(start + delta)
    return _MachineRound(direction, weighted, frozenset(support), steps)


def run_rounds(
    obj: DistributedObjective,
    geom: CommGeometry,
    rule: StepRule,
    seed: int,
    x0: np.ndarray,
    replicate: int = 0,
    record_support: bool = False,
    record_steps: bool = False,
    workers: int = 1,
    on_round: Callable[[int, np.ndarray], None] | None = None,
) -> RoundTrace:
    """Run R rounds and return the consensus iterates and averaging sums.

    Per-machine loops may run on a thread pool; contributions are always
    summed in machine index order so the result does not depend on ``workers``.

    Args:
        obj: The objective
        geom: Communication geometry
        rule: Step coefficients
        seed: Master seed
        x0: Initial point
        replicate: Replicate index used in every stream key
        record_support: Track supports per round and machine
        record_steps: Keep the machine-averaged point of every local step
        workers: Threads for the per-machine loops
        on_round: Called with (round number, consensus iterate) after each round

    Returns:
        RoundTrace: Iterates x_0..x_R plus the weighted average sums
    """
    if obj.num_machines != geom.M:
        raise ParameterRangeError(
            f"objective has {obj.num_machines} machines but the geometry has M={geom.M}"
        )
    if workers < 1:
        raise ParameterRangeError(f"workers must be at least 1, got {workers}")
    x = obj.check_point(x0).copy()
    iterates = [x]
    weighted_sum = np.zeros(obj.dimension)
    total_weight = 0.0
    tracker = SupportTracker(geom.M) if record_support else None
    step_points: list[np.ndarray] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for round_index in range(geom.R):
            participants = round_participants(geom, seed, replicate, round_index)
            start = x

            def machine_round(machine: int, start: np.ndarray = start, r: int = round_index) -> _MachineRound:
                return _run_machine(
                    obj, machine, start, r, geom.K, rule, seed, replicate,
                    record_support, record_steps,
                )

            if pool is None:
                outcomes = [machine_round(machine) for machine in participants]
            else:
                outcomes = list(pool.map(machine_round, participants))

            direction = np.zeros(obj.dimension)
            weighted = np.zeros(obj.dimension)
            for outcome in outcomes:
                direction = direction + outcome.direction
                weighted = weighted + outcome.weighted
            count = len(participants)
            round_weight = 0.0
            for k in range(geom.K):
                round_weight += rule.average_weight(round_index, k)
            weighted_sum = weighted_sum + (round_weight * start + weighted / count)
            total_weight += round_weight

            if record_steps:
                for k in range(geom.K):
                    total = np.zeros(obj.dimension)
                    for outcome in outcomes:
                        total = total + outcome.steps[k]
                    step_points.append(total / count)

            x = start - direction / count
            iterates.append(x)
            if tracker is not None:
                tracker.start_round()
                for machine, outcome in zip(participants, outcomes, strict=True):
                    tracker.merge(machine, outcome.support)
                tracker.end_round(x)
            if on_round is not None:
                on_round(round_index + 1, x)
            logger.debug(f"Round {round_index + 1}/{geom.R} done with {count} machines")
    finally:
        if pool is not None:
            pool.shutdown()
    return RoundTrace(iterates, weighted_sum, total_weight, tracker, step_points)
