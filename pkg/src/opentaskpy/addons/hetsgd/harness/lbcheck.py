"""Verification suites for the two hard constructions.

Each suite runs the optimizers on a fixed instance and checks one property
the construction promises: the closed form fourth coordinate recursion, the
heterogeneity immunity of Minibatch SGD, the Local SGD floor, the chain
algebra, zero-respecting support growth and the residual floor on E_k.
"""

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import opentaskpy.otflogging
import scipy.optimize

from ..exceptions import AcceptanceCheckError, ParameterRangeError
from ..instances import (
    build_chain,
    build_local_lb,
    chain_residual_lower_bound,
    closed_form_x4_trajectory,
    local_lb_floor,
    respects_residual_floor,
    restricted_minimum,
)
from ..optimizers.acsa import run_acsa, run_multistage_acsa
from ..optimizers.geometry import CommGeometry
from ..optimizers.result import RunResult
from ..optimizers.runners import run_inner_outer, run_local_sgd, run_minibatch_sgd
from ..optimizers.schedules import ScheduleSpec
from .support import check_support_progress

logger = opentaskpy.otflogging.init_logging(__name__)

# Local SGD floor instance: L = H/2, mu = lambda
FLOOR_INSTANCE = {"H": 64.0, "lam": 1.0, "mu": 1.0, "L": 32.0, "Delta": 1.0}
FLOOR_GEOMETRY = (2, 5, 4)
FLOOR_ZETAS = (1.0, 10.0)
FLOOR_GRID_POINTS = 50

CHAIN_INSTANCE = {"H": 9.0, "lam": 1.0, "C": 1.0}
CHAIN_ROUNDS = 3
CHAIN_RESIDUAL_ROUNDS = (1, 2, 3, 4, 5, 6)

RECURSION_TOLERANCE = 1e-12
GEOMETRY_TOLERANCE = 1e-9
GRADIENT_TOLERANCE = 1e-8
OPTIMUM_TOLERANCE = 1e-10


@dataclass
class CheckOutcome:
    """Result of one suite."""

    suite: str
    passed: bool
    detail: str
    measurements: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON form."""
        return {
            "suite": self.suite,
            "passed": self.passed,
            "detail": self.detail,
            "measurements": self.measurements,
        }


def check_x4_recursion(seed: int = 0) -> CheckOutcome:
    """Noiseless Local SGD's fourth coordinate against the closed form recursion."""
    params = FLOOR_INSTANCE
    instance = build_local_lb(**params, zeta=1.0)
    grid = [
        (eta, K, R)
        for eta, K, R in zip(
            np.linspace(0.002, 1 / params["L"], 10),
            (1, 2, 3, 5, 8, 1, 2, 3, 5, 8),
            (1, 2, 3, 4, 5, 6, 7, 8, 9, 10),
            strict=True,
        )
    ]
    worst = 0.0
    for eta, K, R in grid:
        run = run_local_sgd(
            instance, CommGeometry(2, K, R), ScheduleSpec.constant(float(eta)), seed
        )
        assert run.iterate_history is not None
        expected = closed_form_x4_trajectory(params["L"], params["mu"], 1.0, float(eta), K, R)
        for r, value in enumerate(expected, start=1):
            error = abs(run.iterate_history[r][3] - value) / max(1.0, abs(value))
            worst = max(worst, error)
    passed = bool(worst <= RECURSION_TOLERANCE)
    return CheckOutcome(
        "x4_recursion",
        passed,
        f"largest relative deviation {worst:.3e} over {len(grid)} (eta, K, R) points",
        {"max_error": float(worst), "points": len(grid)},
    )


def check_minibatch_immunity(seed: int = 0) -> CheckOutcome:
    """Noiseless Minibatch SGD trajectories do not depend on zeta."""
    M, K, R = FLOOR_GEOMETRY
    geometry = CommGeometry(M, K, 10)
    histories = []
    for zeta in (0.0, 1.0, 10.0):
        instance = build_local_lb(**FLOOR_INSTANCE, zeta=zeta)
        run = run_minibatch_sgd(instance, geometry, ScheduleSpec.constant(0.01), seed)
        histories.append(run.iterate_history)
    identical = all(np.array_equal(histories[0], other) for other in histories[1:])
    return CheckOutcome(
        "minibatch_immunity",
        bool(identical),
        "trajectories for zeta in {0, 1, 10} are bit-identical"
        if identical
        else "trajectories differ across zeta",
        {"zetas": [0.0, 1.0, 10.0], "K": K, "R": 10},
    )


def check_local_floor(seed: int = 0) -> CheckOutcome:
    """Local SGD stays above its heterogeneity floor for every stepsize up to 1/L."""
    M, K, R = FLOOR_GEOMETRY
    geometry = CommGeometry(M, K, R)
    etas = np.geomspace(1e-5, 1 / FLOOR_INSTANCE["L"], FLOOR_GRID_POINTS)
    closest = math.inf
    failures = []
    for zeta in FLOOR_ZETAS:
        instance = build_local_lb(**FLOOR_INSTANCE, zeta=zeta)
        floor = local_lb_floor(instance, R)
        for eta in etas:
            run = run_local_sgd(
                instance, geometry, ScheduleSpec.constant(float(eta)), seed,
                averaging="last", record_history=False,
            )
            closest = min(closest, run.final_suboptimality / floor)
            if run.final_suboptimality < floor:
                failures.append({"zeta": zeta, "eta": float(eta)})
    return CheckOutcome(
        "local_floor",
        not failures,
        f"{len(failures)} of {len(etas) * len(FLOOR_ZETAS)} runs fell below the floor",
        {"failures": failures, "min_ratio": float(closest)},
    )


def check_chain_geometry() -> CheckOutcome:
    """q solves 1 - 3q + q^2 = 0, x* is stationary and F* has its closed form."""
    instance = build_chain(**CHAIN_INSTANCE, R=CHAIN_ROUNDS)
    root = scipy.optimize.brentq(lambda q: 1 - 3 * q + q * q, 0.0, 1.0)
    x_star = instance.closed_form_minimizer()
    gradient_norm = float(np.linalg.norm(instance.gradient(x_star)))
    expected = instance.closed_form_optimal_value
    relative = float(abs(instance.value(x_star) - expected) / abs(expected))
    q_error = float(abs(instance.q - root))
    passed = bool(
        q_error <= GEOMETRY_TOLERANCE
        and gradient_norm < GRADIENT_TOLERANCE
        and relative <= OPTIMUM_TOLERANCE
    )
    return CheckOutcome(
        "chain_geometry",
        passed,
        f"|q - root| = {q_error:.2e}, ||grad F(x*)|| = {gradient_norm:.2e},"
        f" relative F* error {relative:.2e}",
        {
            "q": float(instance.q),
            "root": float(root),
            "gradient_norm": gradient_norm,
            "relative_optimum_error": relative,
            "dimension": instance.dimension,
        },
    )


def chain_runs(seed: int = 0, R: int = CHAIN_ROUNDS) -> dict[str, RunResult]:
    """Run every optimizer on the chain with support recording switched on."""
    instance = build_chain(**CHAIN_INSTANCE, R=R)
    geometry = CommGeometry(2, 4, R)
    eta = 1 / (4 * instance.H)
    return {
        "minibatch": run_minibatch_sgd(
            instance, geometry, ScheduleSpec.constant(eta), seed, record_support=True
        ),
        "local": run_local_sgd(
            instance, geometry, ScheduleSpec.constant(eta), seed, record_support=True
        ),
        "inner_outer": run_inner_outer(
            instance, geometry, eta / 2, eta, seed, record_support=True
        ),
        "acsa": run_acsa(instance, geometry, False, seed, record_support=True),
        "multistage_acsa": run_multistage_acsa(
            instance, geometry, instance.constants.Delta or 1.0, seed, record_support=True
        ),
    }


def check_chain_support(seed: int = 0) -> CheckOutcome:
    """Every optimizer uncovers at most one new coordinate per round."""
    violations = {}
    for name, run in chain_runs(seed).items():
        verdict = check_support_progress(run)
        if not verdict:
            violations[name] = verdict.violation
    return CheckOutcome(
        "chain_support",
        not violations,
        "all optimizers stay within E_r after round r"
        if not violations
        else f"support violations: {violations}",
        {"violations": {name: list(v) for name, v in violations.items() if v}},
    )


def check_chain_residual(seed: int = 0) -> CheckOutcome:
    """Exact minima over E_k and finished runs respect the residual floor."""
    failures = []
    for R in CHAIN_RESIDUAL_ROUNDS:
        instance = build_chain(**CHAIN_INSTANCE, R=R)
        for k in range(instance.dimension + 1):
            gap, _ = restricted_minimum(instance, k)
            floor = chain_residual_lower_bound(instance, k)
            optimal = instance.closed_form_optimal_value
            if not respects_residual_floor(gap, floor, optimal, GEOMETRY_TOLERANCE):
                failures.append({"R": R, "k": k, "gap": float(gap), "floor": float(floor)})
    instance = build_chain(**CHAIN_INSTANCE, R=CHAIN_ROUNDS)
    floor = chain_residual_lower_bound(instance, CHAIN_ROUNDS)
    optimal = instance.closed_form_optimal_value
    for name, run in chain_runs(seed).items():
        gap = run.final_suboptimality
        if not respects_residual_floor(gap, floor, optimal, GEOMETRY_TOLERANCE):
            failures.append({"run": name, "gap": float(gap), "floor": float(floor)})
    return CheckOutcome(
        "chain_residual",
        not failures,
        f"{len(failures)} points below the residual floor",
        {"failures": failures},
    )


SUITES: dict[str, Callable[..., CheckOutcome]] = {
    "x4_recursion": check_x4_recursion,
    "minibatch_immunity": check_minibatch_immunity,
    "local_floor": check_local_floor,
    "chain_geometry": lambda seed=0: check_chain_geometry(),
    "chain_support": check_chain_support,
    "chain_residual": check_chain_residual,
}


def run_lower_bound_checks(
    suites: Iterable[str] | None = None, seed: int = 0, strict: bool = False
) -> list[CheckOutcome]:
    """Run the named suites (all of them by default).

    Args:
        suites: Suite names, see ``SUITES``
        seed: Master seed for the runs
        strict: Raise on the first failing suite

    Returns:
        list[CheckOutcome]: One outcome per suite, in the order asked

    Raises:
        ParameterRangeError: Unknown suite name
        AcceptanceCheckError: A suite failed and ``strict`` is set
    """
    names = list(SUITES) if suites is None else list(suites)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ParameterRangeError(f"unknown suites {unknown}, expected some of {list(SUITES)}")
    outcomes = []
    for name in names:
        outcome = SUITES[name](seed=seed)
        logger.info(f"{name}: {'pass' if outcome.passed else 'FAIL'} - {outcome.detail}")
        if strict and not outcome.passed:
            raise AcceptanceCheckError(f"{name} failed: {outcome.detail}")
        outcomes.append(outcome)
    return outcomes
