"""Support tracking for zero-respecting checks on the chain instance."""

from dataclasses import dataclass

import numpy as np
import opentaskpy.otflogging

from ..exceptions import ContractViolationError
from ..instances import SUPPORT_THRESHOLD

logger = opentaskpy.otflogging.init_logging(__name__)


def support_of(x: np.ndarray, threshold: float = SUPPORT_THRESHOLD) -> frozenset[int]:
    """Indices whose magnitude exceeds the threshold."""
    return frozenset(int(index) for index in np.flatnonzero(np.abs(x) > threshold))


class SupportTracker:
    """Collects per-round, per-machine supports of every point a machine touches.

    Round ``r`` (1 based) covers the query points of round r and the local
    iterate the machine ends the round with. The communicated union is the
    support of the consensus iterate produced at the end of the round.
    """

    def __init__(self, num_machines: int, threshold: float = SUPPORT_THRESHOLD):
        """Start with no rounds."""
        self.num_machines = num_machines
        self.threshold = threshold
        self.rounds: list[list[frozenset[int]]] = []
        self.communicated: list[frozenset[int]] = []
        self._current: list[set[int]] | None = None

    def start_round(self) -> None:
        """Open a new round."""
        self._current = [set() for _ in range(self.num_machines)]

    def observe(self, machine: int, x: np.ndarray) -> None:
        """Add the support of ``x`` to machine ``machine`` for the open round."""
        if self._current is None:
            raise ContractViolationError("observe called outside a round")
        self._current[machine] |= support_of(x, self.threshold)

    def merge(self, machine: int, support: frozenset[int]) -> None:
        """Add an already computed support set."""
        if self._current is None:
            raise ContractViolationError("merge called outside a round")
        self._current[machine] |= support

    def end_round(self, consensus: np.ndarray) -> None:
        """Close the round, recording the consensus iterate's support."""
        if self._current is None:
            raise ContractViolationError("end_round called outside a round")
        self.rounds.append([frozenset(machine) for machine in self._current])
        self.communicated.append(support_of(consensus, self.threshold))
        self._current = None


@dataclass(frozen=True)
class SupportVerdict:
    """Outcome of a support check; ``violation`` is (round, machine, coordinate)."""

    passed: bool
    violation: tuple[int, int, int] | None = None

    def __bool__(self) -> bool:
        """Truthiness follows ``passed``."""
        return self.passed


def check_support_progress(run) -> SupportVerdict:  # type: ignore[no-untyped-def]
    """Check that after every round r all supports lie in E_r = {0..r-1}.

    Coordinates are reported 1 based, so coordinate ``j`` is E_j's newest
    direction. Machine indices are 0 based. The communicated union is checked
    after the machines of the same round and is reported as machine -1.

    Args:
        run: A RunResult recorded with ``record_support=True``

    Returns:
        SupportVerdict: pass, or the first violation
    """
    history = getattr(run, "support_history", None)
    if history is None:
        raise ContractViolationError("run has no support history; rerun with record_support=True")
    communicated = getattr(run, "communicated_support", None) or []
    for round_number, machines in enumerate(history, start=1):
        for machine, support in enumerate(machines):
            outside = sorted(index for index in support if index >= round_number)
            if outside:
                logger.info(
                    f"Support check failed at round {round_number}, machine {machine},"
                    f" coordinate {outside[0] + 1}"
                )
                return SupportVerdict(False, (round_number, machine, outside[0] + 1))
        if round_number <= len(communicated):
            outside = sorted(
                index for index in communicated[round_number - 1] if index >= round_number
            )
            if outside:
                return SupportVerdict(False, (round_number, -1, outside[0] + 1))
    return SupportVerdict(True)
