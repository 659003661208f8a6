"""Distributed binary logistic regression."""

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
import opentaskpy.otflogging
import scipy.linalg
import scipy.special

from ..exceptions import ContractViolationError, ParameterRangeError
from ..objective import DistributedObjective, ProblemConstants
from ..rng import RngStream
from .newton import DEFAULT_TOLERANCE

logger = opentaskpy.otflogging.init_logging(__name__)


class LogisticObjective(DistributedObjective):
    """F_m(x) = mean_i log(1 + exp(-y_i <x, phi_i>)) + (ridge/2)||x||^2.

    With ``batch_size`` set, a stochastic gradient averages ``batch_size`` rows
    drawn uniformly with replacement from the machine's data; otherwise the
    oracle returns the full local gradient.
    """

    family = "logistic"
    optimum_source = "newton"

    def __init__(
        self,
        machine_features: Sequence[np.ndarray],
        machine_labels: Sequence[np.ndarray],
        ridge: float = 0.0,
        batch_size: int | None = None,
        minimizer: np.ndarray | None = None,
    ):
        """Store the per-machine data.

        Args:
            machine_features: One n_m x d matrix per machine
            machine_labels: One +-1 vector per machine
            ridge: Ridge coefficient
            batch_size: Rows per stochastic gradient, full batch when None
            minimizer: Attached x*, see ``with_minimizer``
        """
        if len(machine_features) != len(machine_labels) or not machine_features:
            raise ParameterRangeError("need matching, non-empty feature and label lists")
        features = [np.asarray(matrix, dtype=np.float64) for matrix in machine_features]
        labels = [np.asarray(vector, dtype=np.float64) for vector in machine_labels]
        dimension = features[0].shape[1]
        for matrix, vector in zip(features, labels, strict=True):
            if matrix.ndim != 2 or matrix.shape[1] != dimension or matrix.shape[0] != vector.shape[0]:
                raise ParameterRangeError("every machine needs an n x d matrix and n labels")
            if matrix.shape[0] == 0:
                raise ParameterRangeError("every machine needs at least one row")
            if not np.all(np.abs(vector) == 1):
                raise ParameterRangeError("labels must be +1 or -1")
        if ridge < 0:
            raise ParameterRangeError(f"ridge must be non-negative, got {ridge}")
        if batch_size is not None and batch_size < 1:
            raise ParameterRangeError(f"batch_size must be at least 1, got {batch_size}")
        super().__init__(len(features), dimension)
        self._features = features
        self._labels = labels
        self.ridge = ridge
        self.batch_size = batch_size
        self._minimizer = None if minimizer is None else self.check_point(minimizer)
        self._constants = self._derive_constants()
        self.description = {
            "family": self.family,
            "machines": self.num_machines,
            "dimension": dimension,
            "rows": [int(matrix.shape[0]) for matrix in features],
            "ridge": ridge,
            "batch_size": batch_size,
        }

    def with_minimizer(self, x_star: np.ndarray) -> "LogisticObjective":
        """Return a copy with x* attached, making sigma_star, zeta_star, B and Delta exact."""
        return LogisticObjective(
            self._features, self._labels, self.ridge, self.batch_size, x_star
        )

    def machine_data(self, machine: int) -> tuple[np.ndarray, np.ndarray]:
        """Features and labels of one machine."""
        self.check_machine(machine)
        return self._features[machine], self._labels[machine]

    def _smoothness(self) -> float:
        worst = 0.0
        for matrix in self._features:
            gram = matrix.T @ matrix / (4 * matrix.shape[0])
            worst = max(worst, float(scipy.linalg.eigvalsh(gram)[-1]))
        return worst + self.ridge

    def _row_gradients(self, machine: int, x: np.ndarray) -> np.ndarray:
        matrix, labels = self._features[machine], self._labels[machine]
        weights = -labels * scipy.special.expit(-labels * (matrix @ x))
        return weights[:, np.newaxis] * matrix + self.ridge * x

    def _derive_constants(self) -> ProblemConstants:
        H = self._smoothness()
        row_norm = max(float(np.max(np.linalg.norm(matrix, axis=1))) for matrix in self._features)
        sigma = 0.0 if self.batch_size is None else row_norm / math.sqrt(self.batch_size)
        F_zero = self.value(np.zeros(self.dimension))
        x_star = self._minimizer
        if x_star is None:
            # F* >= 0, so F(0) bounds the initial gap
            return ProblemConstants(
                M=self.num_machines, H=H, lam=self.ridge, sigma=sigma, sigma_star=sigma,
                zeta_star=math.inf, zeta_bar=math.inf, Delta=F_zero if F_zero > 0 else None,
                B=None if F_zero > 0 else 1.0,
            )
        zeta_sq = 0.0
        sigma_star_sq = 0.0
        for machine in range(self.num_machines):
            rows = self._row_gradients(machine, x_star)
            mean = rows.mean(axis=0)
            zeta_sq += float(mean @ mean)
            if self.batch_size is not None:
                spread = float(np.mean(np.sum((rows - mean) ** 2, axis=1)))
                sigma_star_sq = max(sigma_star_sq, spread / self.batch_size)
        zeta_sq /= self.num_machines
        norm = float(np.linalg.norm(x_star))
        gap = F_zero - self.value(x_star)
        return ProblemConstants(
            M=self.num_machines,
            H=H,
            lam=self.ridge,
            sigma=sigma,
            sigma_star=min(math.sqrt(sigma_star_sq), sigma),
            zeta_star=math.sqrt(zeta_sq),
            zeta_bar=math.inf,
            B=norm if norm > 0 else 1.0,
            Delta=gap if gap > 0 else None,
        )

    @property
    def constants(self) -> ProblemConstants:
        """Regularity constants (exact at x* once a minimizer is attached)."""
        return self._constants

    @property
    def noiseless(self) -> bool:
        """Full-batch oracles are exact."""
        return self.batch_size is None

    @property
    def known_minimizer(self) -> np.ndarray | None:
        """The attached Newton solution, if any."""
        return self._minimizer

    @property
    def optimum_slack(self) -> float:
        """Certified distance from F(x*) down to the true minimum.

        With ridge > 0, strong convexity gives F(x) - F* <= ||grad F(x)||^2 / (2 ridge).
        Without ridge there is no such certificate and the Newton tolerance is used.
        """
        if self._minimizer is None:
            return 0.0
        if self.ridge > 0:
            norm = float(np.linalg.norm(self.gradient(self._minimizer)))
            return norm**2 / (2 * self.ridge)
        return DEFAULT_TOLERANCE

    def machine_value(self, machine: int, x: np.ndarray) -> float:
        """Mean logistic loss of one machine plus the ridge term."""
        matrix, labels = self._features[machine], self._labels[machine]
        losses = np.logaddexp(0.0, -labels * (matrix @ x))
        return float(np.mean(losses)) + 0.5 * self.ridge * float(x @ x)

    def machine_gradient(self, machine: int, x: np.ndarray) -> np.ndarray:
        """Exact local gradient."""
        matrix, labels = self._features[machine], self._labels[machine]
        weights = -labels * scipy.special.expit(-labels * (matrix @ x))
        return matrix.T @ weights / matrix.shape[0] + self.ridge * x

    def machine_hessian(self, machine: int, x: np.ndarray) -> np.ndarray:
        """Exact local Hessian."""
        matrix, labels = self._features[machine], self._labels[machine]
        probabilities = scipy.special.expit(labels * (matrix @ x))
        curvature = probabilities * (1 - probabilities)
        hessian = (matrix.T * curvature) @ matrix / matrix.shape[0]
        return hessian + self.ridge * np.eye(self.dimension)

    def hessian(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        """Hessian of F, machines summed in index order."""
        point = self.check_point(x)
        total = np.zeros((self.dimension, self.dimension))
        for machine in range(self.num_machines):
            total = total + self.machine_hessian(machine, point)
        return total / self.num_machines

    def draw_samples(
        self, machine: int, stream: RngStream, steps: int, first_step: int = 0
    ) -> np.ndarray | None:
        """Row indices, ``batch_size`` per step, or None for full batches."""
        if self.batch_size is None:
            return None
        rows = self._features[machine].shape[0]
        return stream.integers(steps, self.batch_size, rows, first_step)

    def stochastic_gradient(
        self, machine: int, x: np.ndarray, sample: np.ndarray | None
    ) -> np.ndarray:
        """Gradient over the sampled rows (the full local gradient when sample is None)."""
        if sample is None:
            return self.machine_gradient(machine, x)
        matrix, labels = self._features[machine][sample], self._labels[machine][sample]
        if matrix.shape[0] == 0:
            raise ContractViolationError("empty minibatch")
        weights = -labels * scipy.special.expit(-labels * (matrix @ x))
        return matrix.T @ weights / matrix.shape[0] + self.ridge * x

    def describe(self) -> dict[str, Any]:
        """Return the JSON description."""
        return dict(self.description)
