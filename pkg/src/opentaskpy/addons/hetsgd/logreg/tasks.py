"""Even-versus-odd tasks and the p-mixing data split across machines."""

import itertools
from dataclasses import dataclass

import numpy as np
import opentaskpy.otflogging

from ..exceptions import ParameterRangeError
from ..rng import RngStream, StreamPurpose

logger = opentaskpy.otflogging.init_logging(__name__)

EVEN_DIGITS = (0, 2, 4, 6, 8)
ODD_DIGITS = (1, 3, 5, 7, 9)
TASKS: tuple[tuple[int, int], ...] = tuple(itertools.product(EVEN_DIGITS, ODD_DIGITS))
P_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

# round_index slots of the DATA streams
_TASK_DRAW = 0
_MIXTURE_DRAW = 1


def label_sign(digits: np.ndarray) -> np.ndarray:
    """Map even digits to +1 and odd digits to -1."""
    return np.where(np.asarray(digits) % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class TaskAssignment:
    """Which rows of the pooled dataset each machine holds.

    ``machine_indices[m]`` indexes the pooled feature matrix; machine m's task
    is ``tasks[m]``.
    """

    p: float
    n_per_digit: int
    seed: int
    tasks: tuple[tuple[int, int], ...]
    machine_indices: tuple[np.ndarray, ...]
    task_counts: tuple[int, ...]

    @property
    def num_machines(self) -> int:
        """Number of machines."""
        return len(self.tasks)

    def machine_data(
        self, features: np.ndarray, digits: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Return (features, +-1 labels) for every machine."""
        signs = label_sign(digits)
        return [(features[rows], signs[rows]) for rows in self.machine_indices]


def balanced_digit_indices(digits: np.ndarray, n_per_digit: int | None = None) -> dict[int, np.ndarray]:
    """First n rows of every digit, n the smallest digit count unless given."""
    labels = np.asarray(digits)
    by_digit = {digit: np.flatnonzero(labels == digit) for digit in range(10)}
    smallest = min(len(rows) for rows in by_digit.values())
    n = smallest if n_per_digit is None else n_per_digit
    if n < 1 or n > smallest:
        raise ParameterRangeError(
            f"need {n_per_digit} examples of every digit, the rarest digit has {smallest}"
        )
    return {digit: rows[:n] for digit, rows in by_digit.items()}


def build_tasks_and_assign(
    digits: np.ndarray,
    p: float,
    seed: int,
    n_per_digit: int | None = None,
    machines: int = len(TASKS),
) -> TaskAssignment:
    """Give machine m round(p 2n) rows of task m and the rest from the pooled mixture.

    Both draws are without replacement and come from the machine's DATA
    stream, so the split is a pure function of (digits, p, seed).

    Args:
        digits: Digit label (0..9) of every pooled row
        p: Mixing fraction in [0, 1]
        seed: Master seed
        n_per_digit: Rows kept per digit, the rarest digit's count by default
        machines: Use the first ``machines`` tasks

    Returns:
        TaskAssignment: The split
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterRangeError(f"p must lie in [0, 1], got {p}")
    if not 1 <= machines <= len(TASKS):
        raise ParameterRangeError(f"machines must lie in 1..{len(TASKS)}, got {machines}")
    kept = balanced_digit_indices(digits, n_per_digit)
    n = len(kept[0])
    pooled = np.sort(np.concatenate([kept[digit] for digit in range(10)]))
    share = 2 * n
    from_task = int(round(p * share))
    indices = []
    tasks = TASKS[:machines]
    for machine, (even, odd) in enumerate(tasks):
        task_rows = np.concatenate([kept[even], kept[odd]])
        task_stream = RngStream(seed, 0, machine, _TASK_DRAW, StreamPurpose.DATA)
        mixture_stream = RngStream(seed, 0, machine, _MIXTURE_DRAW, StreamPurpose.DATA)
        chosen_task = task_rows[task_stream.sample_without_replacement(len(task_rows), from_task)]
        chosen_mix = pooled[
            mixture_stream.sample_without_replacement(len(pooled), share - from_task)
        ]
        indices.append(np.concatenate([chosen_task, chosen_mix]))
    logger.info(
        f"Assigned {share} rows to each of {machines} machines with p={p}"
        f" ({from_task} from the machine's task)"
    )
    return TaskAssignment(
        p=p,
        n_per_digit=n,
        seed=seed,
        tasks=tasks,
        machine_indices=tuple(indices),
        task_counts=tuple(from_task for _ in tasks),
    )
