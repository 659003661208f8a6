"""From raw digits to distributed logistic objectives and the zeta_star^2(p) profile."""

from collections.abc import Iterable

import numpy as np
import opentaskpy.otflogging

from ..objective import measure_zeta_star
from .idx import load_idx_pair
from .newton import DEFAULT_TOLERANCE, newton_minimize
from .objective import LogisticObjective
from .pca import pca_reduce
from .tasks import TASKS, TaskAssignment, build_tasks_and_assign

logger = opentaskpy.otflogging.init_logging(__name__)

DEFAULT_COMPONENTS = 100


def prepare_idx(
    images: bytes, labels: bytes, components: int = DEFAULT_COMPONENTS
) -> tuple[np.ndarray, np.ndarray]:
    """Parse IDX buffers and PCA-reduce the raw pixel values.

    Returns:
        tuple: (n x components features, digit labels)
    """
    dataset = load_idx_pair(images, labels)
    features, _ = pca_reduce(dataset.images.astype(np.float64), components)
    return features, dataset.labels


def build_logistic_objective(
    features: np.ndarray,
    digits: np.ndarray,
    p: float,
    seed: int,
    n_per_digit: int | None = None,
    machines: int = len(TASKS),
    ridge: float = 0.0,
    batch_size: int | None = None,
) -> tuple[LogisticObjective, TaskAssignment]:
    """Split the pooled data with mixing fraction p and wrap it as an objective."""
    assignment = build_tasks_and_assign(digits, p, seed, n_per_digit, machines)
    data = assignment.machine_data(features, digits)
    objective = LogisticObjective(
        [rows for rows, _ in data], [signs for _, signs in data], ridge, batch_size
    )
    objective.description.update({"p": p, "seed": seed, "n_per_digit": assignment.n_per_digit})
    return objective, assignment


def attach_optimum(obj: LogisticObjective, tol: float = DEFAULT_TOLERANCE) -> LogisticObjective:
    """Solve for x* with Newton's method and attach it."""
    attached = obj.with_minimizer(newton_minimize(obj, tol))
    attached.description = dict(obj.description)
    return attached


def measure_zeta_profile(
    features: np.ndarray,
    digits: np.ndarray,
    p_grid: Iterable[float],
    seed: int,
    n_per_digit: int | None = None,
    machines: int = len(TASKS),
    ridge: float = 0.0,
    tol: float = DEFAULT_TOLERANCE,
) -> list[tuple[float, float]]:
    """Return (p, zeta_star^2) for every p, sorted by p.

    Each p gets its own split from the same seed and its own Newton solve.
    """
    profile = []
    for p in sorted(set(float(value) for value in p_grid)):
        objective, _ = build_logistic_objective(
            features, digits, p, seed, n_per_digit, machines, ridge
        )
        x_star = newton_minimize(objective, tol)
        zeta_sq = measure_zeta_star(objective, x_star)
        logger.info(f"p={p}: zeta_star^2 = {zeta_sq:.6g}")
        profile.append((p, zeta_sq))
    return profile
