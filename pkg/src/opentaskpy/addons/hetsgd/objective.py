"""Distributed objectives and the gradient oracles shared by every optimizer."""

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Any, ClassVar

import numpy as np
import opentaskpy.otflogging
import scipy.linalg

from .exceptions import (
    ContractViolationError,
    MinimizerRequiredError,
    ParameterRangeError,
)
from .rng import RngStream, StreamPurpose

logger = opentaskpy.otflogging.init_logging(__name__)

UNBOUNDED = "unbounded"
# Relative slack when checking the constant invariants
_INVARIANT_SLACK = 1e-9


@dataclass(frozen=True)
class ProblemConstants:
    """Regularity constants of an M machine problem.

    ``zeta_bar`` is ``math.inf`` when the uniform heterogeneity is unbounded.
    ``B`` and ``Delta`` are optional but at least one must be present.
    """

    M: int
    H: float
    lam: float
    sigma: float
    sigma_star: float
    zeta_star: float
    zeta_bar: float
    B: float | None = None
    Delta: float | None = None

    def __post_init__(self) -> None:
        """Validate the invariants between the constants."""
        if self.M < 1:
            raise ParameterRangeError(f"M must be at least 1, got {self.M}")
        if not self.H > 0:
            raise ParameterRangeError(f"H must be positive, got {self.H}")
        if self.lam < 0 or self.lam > self.H * (1 + _INVARIANT_SLACK):
            raise ParameterRangeError(
                f"lambda must lie in [0, H], got lambda={self.lam}, H={self.H}"
            )
        if self.sigma < 0 or self.sigma_star < 0:
            raise ParameterRangeError("noise levels must be non-negative")
        if self.sigma_star > self.sigma * (1 + _INVARIANT_SLACK):
            raise ParameterRangeError(
                f"sigma_star ({self.sigma_star}) exceeds sigma ({self.sigma})"
            )
        if self.zeta_star < 0 or self.zeta_bar < 0:
            raise ParameterRangeError("heterogeneity must be non-negative")
        if math.isfinite(self.zeta_bar) and self.zeta_star > self.zeta_bar * (
            1 + _INVARIANT_SLACK
        ) + _INVARIANT_SLACK:
            raise ParameterRangeError(
                f"zeta_star ({self.zeta_star}) exceeds zeta_bar ({self.zeta_bar})"
            )
        if self.B is None and self.Delta is None:
            raise ParameterRangeError("at least one of B and Delta is required")
        if self.B is not None and not self.B > 0:
            raise ParameterRangeError(f"B must be positive, got {self.B}")
        if self.Delta is not None and not self.Delta > 0:
            raise ParameterRangeError(f"Delta must be positive, got {self.Delta}")

    @property
    def strongly_convex(self) -> bool:
        """Return True when lambda is positive."""
        return self.lam > 0

    def to_dict(self) -> dict[str, Any]:
        """Serialise to plain JSON types, writing infinite zeta_bar as ``unbounded``."""
        values = asdict(self)
        if not math.isfinite(self.zeta_bar):
            values["zeta_bar"] = UNBOUNDED
        return values

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "ProblemConstants":
        """Inverse of ``to_dict``."""
        values = dict(values)
        if values.get("zeta_bar") == UNBOUNDED:
            values["zeta_bar"] = math.inf
        return cls(**values)

    def bound_values(self) -> dict[str, float]:
        """Return the constants keyed by the parameter names the rate rows use."""
        values: dict[str, float] = {
            "M": self.M,
            "H": self.H,
            "lam": self.lam,
            "sigma": self.sigma,
            "sigma_star": self.sigma_star,
            "zeta_star": self.zeta_star,
            "zeta_bar": self.zeta_bar,
        }
        if self.B is not None:
            values["B"] = self.B
        if self.Delta is not None:
            values["Delta"] = self.Delta
        return values


class DistributedObjective(ABC):
    """F(x) = (1/M) sum_m F_m(x) with exact and stochastic per-machine gradients.

    Subclasses provide the per-machine value and gradient, the noise draw and
    the stochastic gradient for one draw. Instances are immutable once built.
    """

    family: ClassVar[str] = "abstract"
    # How F* was obtained when one is available
    optimum_source: ClassVar[str] = "known"

    def __init__(self, num_machines: int, dimension: int):
        """Record the shape of the problem.

        Args:
            num_machines: Number of machines M
            dimension: Dimension of the decision variable
        """
        if num_machines < 1 or dimension < 1:
            raise ParameterRangeError(
                f"need at least one machine and one dimension, got M={num_machines}, d={dimension}"
            )
        self._num_machines = num_machines
        self._dimension = dimension
        self.description: dict[str, Any] = {"family": self.family}

    @property
    def num_machines(self) -> int:
        """Number of machines M."""
        return self._num_machines

    @property
    def dimension(self) -> int:
        """Dimension of x."""
        return self._dimension

    @property
    @abstractmethod
    def constants(self) -> ProblemConstants:
        """Regularity constants."""

    @property
    def noiseless(self) -> bool:
        """True when every stochastic gradient equals the exact gradient."""
        return self.constants.sigma == 0

    @property
    def known_minimizer(self) -> np.ndarray | None:
        """Return x* when it is known in closed form or was attached."""
        return None

    @property
    def known_optimal_value(self) -> float | None:
        """Return F* when x* is known."""
        x_star = self.known_minimizer
        return None if x_star is None else self.value(x_star)

    @property
    def optimum_slack(self) -> float:
        """How far ``known_optimal_value`` may sit above the true minimum."""
        return 0.0

    def check_point(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        """Return x as a float vector, rejecting the wrong dimension."""
        point = np.asarray(x, dtype=np.float64)
        if point.shape != (self._dimension,):
            raise ContractViolationError(
                f"expected a vector of dimension {self._dimension}, got shape {point.shape}"
            )
        return point

    def check_machine(self, machine: int) -> None:
        """Reject machine indices outside ``0..M-1``."""
        if not 0 <= machine < self._num_machines:
            raise ContractViolationError(
                f"machine index {machine} outside 0..{self._num_machines - 1}"
            )

    @abstractmethod
    def machine_value(self, machine: int, x: np.ndarray) -> float:
        """Return F_m(x)."""

    @abstractmethod
    def machine_gradient(self, machine: int, x: np.ndarray) -> np.ndarray:
        """Return the exact gradient of F_m at x."""

    @abstractmethod
    def draw_samples(
        self, machine: int, stream: RngStream, steps: int, first_step: int = 0
    ) -> np.ndarray | None:
        """Draw the randomness for ``steps`` stochastic gradients.

        Returns None for noiseless objectives. Row ``k`` is the sample of step
        ``first_step + k``.
        """

    @abstractmethod
    def stochastic_gradient(
        self, machine: int, x: np.ndarray, sample: np.ndarray | None
    ) -> np.ndarray:
        """Return the stochastic gradient of F_m at x for one drawn sample."""

    def stochastic_gradients(
        self, machine: int, x: np.ndarray, samples: np.ndarray | None
    ) -> np.ndarray:
        """Evaluate one stochastic gradient per sample row at the same x."""
        if samples is None:
            return self.machine_gradient(machine, x)[np.newaxis, :]
        return np.stack(
            [self.stochastic_gradient(machine, x, sample) for sample in samples]
        )

    def value(self, x: np.ndarray) -> float:
        """Return F(x), summing machines in index order."""
        point = self.check_point(x)
        total = 0.0
        for machine in range(self._num_machines):
            total += self.machine_value(machine, point)
        return total / self._num_machines

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Return the exact gradient of F at x."""
        return average_gradient(self, x)

    def describe(self) -> dict[str, Any]:
        """Return the JSON description (family plus parameters)."""
        return dict(self.description)


class QuadraticObjective(DistributedObjective):
    """F_m(x) = 0.5 x'A_m x - h_m'x + c_m with additive Gaussian gradient noise.

    The noise adds ``sigma / sqrt(d)`` times a standard normal vector, so its
    total variance is sigma**2 at every point.
    """

    family = "quadratic"

    def __init__(
        self,
        hessians: Sequence[np.ndarray] | np.ndarray,
        linear: Sequence[np.ndarray] | np.ndarray,
        offsets: Sequence[float] | None = None,
        sigma: float = 0.0,
        smoothness: float | None = None,
        strong_convexity: float | None = None,
    ):
        """Build the objective and derive its constants in closed form.

        Args:
            hessians: M symmetric positive semi-definite d x d matrices
            linear: M vectors h_m
            offsets: Optional constants c_m
            sigma: Gradient noise standard deviation
            smoothness: Declared H, defaults to the largest Hessian eigenvalue
            strong_convexity: Declared lambda, defaults to the smallest eigenvalue
        """
        hessian_stack = np.asarray(hessians, dtype=np.float64)
        linear_stack = np.asarray(linear, dtype=np.float64)
        if hessian_stack.ndim != 3 or hessian_stack.shape[1] != hessian_stack.shape[2]:
            raise ContractViolationError("hessians must have shape (M, d, d)")
        if linear_stack.shape != hessian_stack.shape[:2]:
            raise ContractViolationError("linear terms must have shape (M, d)")
        if not np.allclose(hessian_stack, np.transpose(hessian_stack, (0, 2, 1))):
            raise ContractViolationError("hessians must be symmetric")
        if sigma < 0:
            raise ParameterRangeError(f"sigma must be non-negative, got {sigma}")

        super().__init__(hessian_stack.shape[0], hessian_stack.shape[1])
        self._hessians = hessian_stack
        self._linear = linear_stack
        self._offsets = (
            np.zeros(self.num_machines)
            if offsets is None
            else np.asarray(offsets, dtype=np.float64)
        )
        self._sigma = float(sigma)
        self._noise_scale = self._sigma / math.sqrt(self.dimension)

        eigenvalues = np.concatenate(
            [scipy.linalg.eigvalsh(matrix) for matrix in hessian_stack]
        )
        self._smoothness = (
            float(eigenvalues.max()) if smoothness is None else float(smoothness)
        )
        self._strong_convexity = (
            max(0.0, float(eigenvalues.min()))
            if strong_convexity is None
            else float(strong_convexity)
        )
        self._minimizer = self._solve_minimizer()
        self._constants = self._derive_constants()

    @property
    def hessians(self) -> np.ndarray:
        """Per-machine Hessians, shape (M, d, d)."""
        return self._hessians

    @property
    def linear_terms(self) -> np.ndarray:
        """Per-machine linear terms, shape (M, d)."""
        return self._linear

    def average_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the Hessian and linear term of the averaged objective."""
        hessian = np.zeros((self.dimension, self.dimension))
        linear = np.zeros(self.dimension)
        for machine in range(self.num_machines):
            hessian = hessian + self._hessians[machine]
            linear = linear + self._linear[machine]
        return hessian / self.num_machines, linear / self.num_machines

    def _solve_minimizer(self) -> np.ndarray | None:
        hessian, linear = self.average_system()
        solution, _, rank, _ = scipy.linalg.lstsq(hessian, linear)
        residual = hessian @ solution - linear
        if not np.all(np.abs(residual) <= 1e-8 * max(1.0, float(np.abs(linear).max()))):
            logger.warning(
                f"Quadratic objective of rank {rank} has no minimizer, leaving x* unknown"
            )
            return None
        return np.asarray(solution, dtype=np.float64)

    def _derive_constants(self) -> ProblemConstants:
        x_star = self._minimizer
        zeta_star = 0.0
        bound_b: float | None = 1.0
        delta: float | None = None
        if x_star is not None:
            zeta_star = math.sqrt(measure_zeta_star(self, x_star))
            norm = float(np.linalg.norm(x_star))
            bound_b = norm if norm > 0 else 1.0
            gap = self.value(np.zeros(self.dimension)) - self.value(x_star)
            delta = gap if gap > 0 else None
        same_hessian = all(
            np.array_equal(self._hessians[0], matrix) for matrix in self._hessians[1:]
        )
        zeta_bar = math.inf
        if same_hessian:
            mean_linear = self._linear.mean(axis=0)
            zeta_bar = float(np.linalg.norm(self._linear - mean_linear, axis=1).max())
            zeta_bar = max(zeta_bar, zeta_star)
        return ProblemConstants(
            M=self.num_machines,
            H=self._smoothness,
            lam=self._strong_convexity,
            sigma=self._sigma,
            sigma_star=self._sigma,
            zeta_star=zeta_star,
            zeta_bar=zeta_bar,
            B=bound_b,
            Delta=delta,
        )

    @property
    def constants(self) -> ProblemConstants:
        """Closed-form constants."""
        return self._constants

    @property
    def known_minimizer(self) -> np.ndarray | None:
        """Solution of the averaged linear system."""
        return None if self._minimizer is None else self._minimizer.copy()

    def machine_value(self, machine: int, x: np.ndarray) -> float:
        """Return F_m(x)."""
        hessian = self._hessians[machine]
        return float(
            0.5 * x @ hessian @ x - self._linear[machine] @ x + self._offsets[machine]
        )

    def machine_gradient(self, machine: int, x: np.ndarray) -> np.ndarray:
        """Return A_m x - h_m."""
        return self._hessians[machine] @ x - self._linear[machine]

    def draw_samples(
        self, machine: int, stream: RngStream, steps: int, first_step: int = 0
    ) -> np.ndarray | None:
        """Standard normal vectors, one row per step."""
        if self._sigma == 0:
            return None
        return stream.normals(steps, self.dimension, first_step)

    def stochastic_gradient(
        self, machine: int, x: np.ndarray, sample: np.ndarray | None
    ) -> np.ndarray:
        """Exact gradient plus scaled Gaussian noise."""
        gradient = self.machine_gradient(machine, x)
        if sample is None:
            return gradient
        return gradient + self._noise_scale * sample

    def stochastic_gradients(
        self, machine: int, x: np.ndarray, samples: np.ndarray | None
    ) -> np.ndarray:
        """Vectorised form of ``stochastic_gradient`` at a fixed x."""
        gradient = self.machine_gradient(machine, x)
        if samples is None:
            return gradient[np.newaxis, :]
        return gradient[np.newaxis, :] + self._noise_scale * samples


def average_gradient(obj: DistributedObjective, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return (1/M) sum_m grad F_m(x) from the exact per-machine gradients.

    Args:
        obj: The objective
        x: Point of evaluation

    Returns:
        np.ndarray: The averaged gradient
    """
    point = obj.check_point(x)
    total = np.zeros(obj.dimension)
    for machine in range(obj.num_machines):
        total = total + obj.machine_gradient(machine, point)
    return total / obj.num_machines


def minibatch_gradient(
    obj: DistributedObjective,
    x: Sequence[float] | np.ndarray,
    K: int,
    seed: int,
    replicate: int = 0,
    round_index: int = 0,
    machines: Sequence[int] | None = None,
) -> np.ndarray:
    """Average K stochastic gradients per machine, all taken at x.

    Machine ``m`` draws its K samples from the stream keyed by
    ``(seed, replicate, m, round_index)``, sample ``k`` from step ``k``.

    Args:
        obj: The objective
        x: Point of evaluation
        K: Samples per machine
        seed: Master seed
        replicate: Replicate index of the stream key
        round_index: Round index of the stream key
        machines: Participating machines, all of them by default

    Returns:
        np.ndarray: (1/(|machines| K)) times the sum of the stochastic gradients
    """
    if K < 1:
        raise ParameterRangeError(f"K must be at least 1, got {K}")
    point = obj.check_point(x)
    if obj.noiseless and machines is None:
        return average_gradient(obj, point)
    selected = range(obj.num_machines) if machines is None else machines
    total = np.zeros(obj.dimension)
    count = 0
    for machine in selected:
        obj.check_machine(machine)
        stream = RngStream(seed, replicate, machine, round_index)
        samples = obj.draw_samples(machine, stream, K)
        gradients = obj.stochastic_gradients(machine, point, samples)
        if samples is None:
            gradients = np.broadcast_to(gradients, (K, obj.dimension))
        machine_sum = np.zeros(obj.dimension)
        for k in range(K):
            machine_sum = machine_sum + gradients[k]
        total = total + machine_sum
        count += 1
    return total / (count * K)


def _resolve_minimizer(
    obj: DistributedObjective, minimizer: np.ndarray | None, operation: str
) -> np.ndarray:
    if minimizer is not None:
        return obj.check_point(minimizer)
    known = obj.known_minimizer
    if known is None:
        raise MinimizerRequiredError(operation)
    return known


def measure_zeta_star(
    obj: DistributedObjective, minimizer: np.ndarray | None = None
) -> float:
    """Return the heterogeneity at the optimum, (1/M) sum_m ||grad F_m(x*)||^2.

    Args:
        obj: The objective
        minimizer: x*, defaults to ``obj.known_minimizer``

    Returns:
        float: zeta_star squared
    """
    x_star = _resolve_minimizer(obj, minimizer, "measure_zeta_star")
    total = 0.0
    for machine in range(obj.num_machines):
        gradient = obj.machine_gradient(machine, x_star)
        total += float(gradient @ gradient)
    return total / obj.num_machines


def estimate_sigma_star(
    obj: DistributedObjective,
    draws: int,
    seed: int = 0,
    minimizer: np.ndarray | None = None,
) -> float:
    """Estimate the gradient noise variance at the optimum.

    Args:
        obj: The objective
        draws: Samples per machine
        seed: Seed of the estimation streams
        minimizer: x*, defaults to ``obj.known_minimizer``

    Returns:
        float: Max over machines of the empirical variance, i.e. sigma_star squared
    """
    if draws < 1:
        raise ParameterRangeError(f"draws must be at least 1, got {draws}")
    x_star = _resolve_minimizer(obj, minimizer, "estimate_sigma_star")
    if obj.noiseless:
        return 0.0
    worst = 0.0
    for machine in range(obj.num_machines):
        stream = RngStream(seed, 0, machine, 0, StreamPurpose.ESTIMATE)
        samples = obj.draw_samples(machine, stream, draws)
        gradients = obj.stochastic_gradients(machine, x_star, samples)
        centred = gradients - gradients.mean(axis=0)
        variance = float(np.mean(np.sum(centred * centred, axis=1)))
        logger.debug(f"Machine {machine} noise variance at x*: {variance}")
        worst = max(worst, variance)
    return worst
