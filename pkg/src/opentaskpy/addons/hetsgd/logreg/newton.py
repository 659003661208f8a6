"""Damped Newton's method for the global objective."""

from dataclasses import dataclass
from typing import Protocol

import numpy as np
import opentaskpy.otflogging
import scipy.linalg

from ..exceptions import ConvergenceError

logger = opentaskpy.otflogging.init_logging(__name__)

DEFAULT_TOLERANCE = 1e-10
SINGULAR_RIDGE = 1e-8
_ARMIJO = 1e-4
_MIN_STEP = 1e-12


class TwiceDifferentiable(Protocol):
    """What Newton's method needs from an objective."""

    dimension: int

    def value(self, x: np.ndarray) -> float: ...  # noqa: D102

    def gradient(self, x: np.ndarray) -> np.ndarray: ...  # noqa: D102

    def hessian(self, x: np.ndarray) -> np.ndarray: ...  # noqa: D102


@dataclass(frozen=True)
class NewtonResult:
    """Final iterate, iterations used and the final gradient norm."""

    x: np.ndarray
    iterations: int
    gradient_norm: float


def _newton_direction(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(hessian)
    except np.linalg.LinAlgError:
        logger.warning(f"Hessian not positive definite, adding ridge {SINGULAR_RIDGE}")
        factor = scipy.linalg.cho_factor(hessian + SINGULAR_RIDGE * np.eye(hessian.shape[0]))
    return -scipy.linalg.cho_solve(factor, gradient)


def newton_solve(
    obj: TwiceDifferentiable,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = 100,
    x0: np.ndarray | None = None,
) -> NewtonResult:
    """Minimise with Newton steps and Armijo backtracking until ||grad F|| <= tol.

    When backtracking cannot find a decrease in F (values at rounding level)
    the full step is taken if it shrinks the gradient norm.

    Args:
        obj: Objective with value, gradient and hessian
        tol: Gradient norm target
        max_iterations: Iteration cap
        x0: Starting point, zero by default

    Returns:
        NewtonResult: Solution and diagnostics

    Raises:
        ConvergenceError: The cap was hit first
    """
    x = np.zeros(obj.dimension) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    gradient = obj.gradient(x)
    norm = float(np.linalg.norm(gradient))
    for iteration in range(max_iterations):
        if norm <= tol:
            logger.debug(f"Newton converged after {iteration} iterations, |grad| = {norm:.3e}")
            return NewtonResult(x, iteration, norm)
        direction = _newton_direction(obj.hessian(x), gradient)
        slope = float(gradient @ direction)
        current = obj.value(x)
        step = 1.0
        while step >= _MIN_STEP and obj.value(x + step * direction) > current + _ARMIJO * step * slope:
            step *= 0.5
        if step < _MIN_STEP:
            step = 1.0
            candidate = x + direction
            candidate_gradient = obj.gradient(candidate)
            if float(np.linalg.norm(candidate_gradient)) >= norm:
                raise ConvergenceError("line search failed to make progress", norm)
            x, gradient = candidate, candidate_gradient
        else:
            x = x + step * direction
            gradient = obj.gradient(x)
        norm = float(np.linalg.norm(gradient))
        logger.log(12, f"Newton iteration {iteration + 1}: step {step}, |grad| = {norm:.3e}")
    if norm <= tol:
        return NewtonResult(x, max_iterations, norm)
    raise ConvergenceError(
        f"Newton did not reach |grad| <= {tol} in {max_iterations} iterations", norm
    )


def newton_minimize(
    obj: TwiceDifferentiable,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = 100,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Return just the minimiser found by ``newton_solve``."""
    return newton_solve(obj, tol, max_iterations, x0).x
