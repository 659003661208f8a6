"""Run results and iterate averaging."""

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..exceptions import ContractViolationError

SUBOPT_KNOWN = "known"
SUBOPT_NEWTON = "newton"
SUBOPT_RAW = "raw"


@dataclass
class RunResult:
    """Outcome of one optimizer run.

    ``suboptimality_series[r - 1]`` is F(x_r) - F* for the consensus iterate after
    round r (raw F values when no optimum is known, see ``subopt_mode``).
    ``support_history[r - 1][m]`` is machine m's support during round r.
    """

    final_point: np.ndarray
    final_suboptimality: float
    suboptimality_series: np.ndarray
    iterate_history: np.ndarray | None = None
    support_history: list[list[frozenset[int]]] | None = None
    communicated_support: list[frozenset[int]] | None = None
    step_history: np.ndarray | None = None
    config: dict[str, Any] = field(default_factory=dict)
    rng: dict[str, Any] = field(default_factory=dict)
    optimal_value: float | None = None
    subopt_mode: str = SUBOPT_KNOWN
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        """Number of completed rounds."""
        return len(self.suboptimality_series)

    def rounds_to_tol(self, tolerance: float) -> int | None:
        """First round whose suboptimality is at most ``tolerance``, if any."""
        hits = np.flatnonzero(self.suboptimality_series <= tolerance)
        return int(hits[0]) + 1 if hits.size else None

    def to_dict(self) -> dict[str, Any]:
        """JSON friendly summary (histories are left out)."""
        return {
            "final_point": self.final_point.tolist(),
            "final_suboptimality": self.final_suboptimality,
            "suboptimality_series": self.suboptimality_series.tolist(),
            "optimal_value": self.optimal_value,
            "subopt_mode": self.subopt_mode,
            "config": self.config,
            "rng": self.rng,
            "extras": self.extras,
        }


def average_iterates(
    history: Sequence[np.ndarray] | np.ndarray, weights: Sequence[float] | np.ndarray
) -> np.ndarray:
    """Return (1/W) sum_t w_t x_t with W = sum_t w_t, summed in index order.

    Args:
        history: Iterates x_t
        weights: Weights w_t, same length

    Returns:
        np.ndarray: The weighted average
    """
    points = [np.asarray(point, dtype=np.float64) for point in history]
    weight_list = [float(weight) for weight in weights]
    if len(points) != len(weight_list):
        raise ContractViolationError(
            f"{len(points)} iterates but {len(weight_list)} weights"
        )
    if not points:
        raise ContractViolationError("cannot average an empty history")
    if any(weight < 0 for weight in weight_list):
        raise ContractViolationError("weights must be non-negative")
    total_weight = 0.0
    total = np.zeros_like(points[0])
    for point, weight in zip(points, weight_list, strict=True):
        total = total + weight * point
        total_weight += weight
    if not total_weight > 0:
        raise ContractViolationError("weights sum to zero")
    return total / total_weight
