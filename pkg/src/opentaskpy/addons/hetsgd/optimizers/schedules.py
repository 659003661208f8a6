"""Stepsize and averaging-weight schedules.

A schedule maps a step index ``t`` (0 based) to a stepsize and an averaging
weight. Minibatch SGD indexes by round, Local SGD by local step ``r*K + k``.
"""

import math
from dataclasses import dataclass, field
from typing import Any

from ..exceptions import ParameterRangeError

CONSTANT = "constant"
STICH = "stich"
POLY_DECAY = "poly_decay"
THEOREM1_CONVEX = "theorem1_convex"
THEOREM2_CONVEX = "theorem2_convex"
THEOREM2_STRONGLY_CONVEX = "theorem2_strongly_convex"

_REQUIRED = {
    CONSTANT: ("eta",),
    STICH: ("H", "lam", "R"),
    POLY_DECAY: ("lam", "a"),
    THEOREM1_CONVEX: ("H", "B", "sigma_star", "M", "K", "R"),
    THEOREM2_CONVEX: ("H", "B", "sigma", "sigma_star", "zeta_bar", "M", "K", "R"),
    THEOREM2_STRONGLY_CONVEX: ("H", "lam"),
}

SCHEDULE_KINDS = tuple(_REQUIRED)


@dataclass(frozen=True)
class ScheduleSpec:
    """A named schedule and its parameters."""

    kind: str
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check the kind and its parameters."""
        if self.kind not in _REQUIRED:
            raise ParameterRangeError(
                f"unknown schedule kind '{self.kind}', expected one of {list(_REQUIRED)}"
            )
        for name in _REQUIRED[self.kind]:
            if name not in self.params:
                raise ParameterRangeError(f"schedule '{self.kind}' needs parameter '{name}'")
        if self.kind == CONSTANT and self.params["eta"] < 0:
            raise ParameterRangeError(f"stepsize must be non-negative, got {self.params['eta']}")
        if self.kind in (STICH, POLY_DECAY, THEOREM2_STRONGLY_CONVEX) and not self.params["lam"] > 0:
            raise ParameterRangeError(f"schedule '{self.kind}' needs lambda > 0")
        if self.kind == THEOREM2_CONVEX and not math.isfinite(self.params["zeta_bar"]):
            raise ParameterRangeError("theorem2_convex needs a finite zeta_bar")

    @classmethod
    def constant(cls, eta: float) -> "ScheduleSpec":
        """Constant stepsize with uniform weights."""
        return cls(CONSTANT, {"eta": eta})

    @classmethod
    def stich(cls, H: float, lam: float, R: int) -> "ScheduleSpec":
        """Strongly convex Minibatch schedule with its averaging weights."""
        return cls(STICH, {"H": H, "lam": lam, "R": R})

    @classmethod
    def poly_decay(cls, lam: float, a: float) -> "ScheduleSpec":
        """eta_t = 2/(lam (a + t + 1)), w_t = a + t."""
        return cls(POLY_DECAY, {"lam": lam, "a": a})

    @classmethod
    def theorem2_strongly_convex(cls, H: float, lam: float) -> "ScheduleSpec":
        """poly_decay with a = 20 H / lam."""
        return cls(THEOREM2_STRONGLY_CONVEX, {"H": H, "lam": lam})

    @classmethod
    def theorem1_convex(
        cls, H: float, B: float, sigma_star: float, M: int, K: int, R: int
    ) -> "ScheduleSpec":
        """eta = min{1/(4H), B sqrt(MK)/(sigma_star sqrt(R))}."""
        return cls(
            THEOREM1_CONVEX,
            {"H": H, "B": B, "sigma_star": sigma_star, "M": M, "K": K, "R": R},
        )

    @classmethod
    def theorem2_convex(
        cls,
        H: float,
        B: float,
        sigma: float,
        sigma_star: float,
        zeta_bar: float,
        M: int,
        K: int,
        R: int,
    ) -> "ScheduleSpec":
        """Constant Local SGD stepsize of the convex heterogeneous guarantee."""
        return cls(
            THEOREM2_CONVEX,
            {
                "H": H,
                "B": B,
                "sigma": sigma,
                "sigma_star": sigma_star,
                "zeta_bar": zeta_bar,
                "M": M,
                "K": K,
                "R": R,
            },
        )

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "ScheduleSpec":
        """Build from ``{"kind": ..., <params>}``."""
        params = {key: value for key, value in values.items() if key != "kind"}
        return cls(values["kind"], params)

    def to_dict(self) -> dict[str, Any]:
        """Inverse of ``from_dict``."""
        return {"kind": self.kind, **self.params}

    @property
    def is_constant(self) -> bool:
        """True when the stepsize does not depend on t."""
        return self.kind in (CONSTANT, THEOREM1_CONVEX, THEOREM2_CONVEX)

    def _constant_value(self) -> float:
        p = self.params
        if self.kind == CONSTANT:
            return float(p["eta"])
        if self.kind == THEOREM1_CONVEX:
            candidates = [1 / (4 * p["H"])]
            if p["sigma_star"] > 0:
                candidates.append(
                    p["B"] * math.sqrt(p["M"] * p["K"]) / (p["sigma_star"] * math.sqrt(p["R"]))
                )
            return min(candidates)
        candidates = [1 / (10 * p["H"])]
        K, R = p["K"], p["R"]
        if p["sigma_star"] > 0:
            candidates.append(
                p["B"] * math.sqrt(p["M"]) / (p["sigma_star"] * math.sqrt(K * R))
            )
        if p["sigma"] > 0:
            candidates.append((p["B"] ** 2 / (p["H"] * K * K * p["sigma"] ** 2)) ** (1 / 3))
        if p["zeta_bar"] > 0:
            candidates.append((p["B"] ** 2 / (p["H"] * K * K * p["zeta_bar"] ** 2)) ** (1 / 3))
        return min(candidates)

    def _decay_offset(self) -> float:
        if self.kind == THEOREM2_STRONGLY_CONVEX:
            return 20 * self.params["H"] / self.params["lam"]
        return float(self.params["a"])

    def _stich_tail(self) -> bool:
        p = self.params
        return p["R"] > 4 * p["H"] / p["lam"]

    def stepsize(self, t: int) -> float:
        """Return eta_t."""
        if self.is_constant:
            return self._constant_value()
        p = self.params
        if self.kind == STICH:
            start = math.ceil(p["R"] / 2)
            if not self._stich_tail() or t < start:
                return 1 / (4 * p["H"])
            kappa = 8 * p["H"] / p["lam"]
            return 2 / (p["lam"] * (kappa + t - start))
        return 2 / (p["lam"] * (self._decay_offset() + t + 1))

    def weight(self, t: int) -> float:
        """Return the averaging weight w_t."""
        if self.is_constant:
            return 1.0
        p = self.params
        if self.kind == STICH:
            if not self._stich_tail():
                eta = 1 / (4 * p["H"])
                return (1 - p["lam"] * eta) ** (-(t + 1))
            start = math.ceil(p["R"] / 2)
            if t < start:
                return 0.0
            kappa = 8 * p["H"] / p["lam"]
            return (kappa + t - start) ** 2
        return self._decay_offset() + t
