"""Communication geometry of an intermittent-communication run."""

from dataclasses import dataclass
from typing import Any

from ..exceptions import ParameterRangeError


@dataclass(frozen=True)
class CommGeometry:
    """M machines, K local gradients per round, R rounds, S participants per round."""

    M: int
    K: int
    R: int
    S: int | None = None

    def __post_init__(self) -> None:
        """Fill in S and validate the ranges."""
        if self.M < 1:
            raise ParameterRangeError(f"M must be at least 1, got {self.M}")
        if self.K < 1:
            raise ParameterRangeError(f"K must be at least 1, got {self.K}")
        if self.R < 0:
            raise ParameterRangeError(f"R must be non-negative, got {self.R}")
        if self.S is None:
            object.__setattr__(self, "S", self.M)
        assert self.S is not None
        if not 1 <= self.S <= self.M:
            raise ParameterRangeError(f"S must lie in 1..M = 1..{self.M}, got {self.S}")

    @property
    def T(self) -> int:
        """Stochastic gradients per machine, K * R."""
        return self.K * self.R

    @property
    def participants(self) -> int:
        """S with the default already applied."""
        assert self.S is not None
        return self.S

    @property
    def full_participation(self) -> bool:
        """True when every machine takes part in every round."""
        return self.S == self.M

    def to_dict(self) -> dict[str, Any]:
        """Plain dict form."""
        return {"M": self.M, "K": self.K, "R": self.R, "S": self.S}
