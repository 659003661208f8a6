"""Hard problem families with closed-form minimizers, optimal values and heterogeneity.

Two adversarial constructions live here. ``LocalLBInstance`` is the four
coordinate problem on which Local SGD with a fixed stepsize pays for
heterogeneity while Minibatch SGD does not. ``ChainInstance`` is the pair of
chain quadratics on which a zero-respecting method uncovers one coordinate per
communication round. Random quadratic suites for the compliance checks are
generated here too.
"""

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
import opentaskpy.otflogging
import scipy.linalg

from .exceptions import ContractViolationError, ParameterRangeError
from .objective import (
    DistributedObjective,
    ProblemConstants,
    QuadraticObjective,
    measure_zeta_star,
)
from .rng import RngStream, StreamPurpose

logger = opentaskpy.otflogging.init_logging(__name__)

SUPPORT_THRESHOLD = 1e-14
RESIDUAL_ROUNDING = 1e-12

_ROLE_FIRST = 1
_ROLE_SECOND = 2
_ROLE_PAD = 3


def machine_roles(machines: int) -> list[int]:
    """Split machines into the two halves plus an optional padding machine.

    The first ``machines // 2`` machines get the first function, the next
    ``machines // 2`` the second, and an odd last machine gets (lambda/2)||x||^2.
    """
    if machines < 2:
        raise ParameterRangeError(f"the construction needs at least 2 machines, got {machines}")
    half = machines // 2
    roles = [_ROLE_FIRST] * half + [_ROLE_SECOND] * half
    if machines % 2:
        roles.append(_ROLE_PAD)
    return roles


class LocalLBInstance(DistributedObjective):
    """Four-dimensional construction against fixed-stepsize Local SGD.

    G(x) = mu/2 (x1 - c)^2 + H/2 (x2 - sqrt(mu) c / sqrt(H))^2 + H/8 (x3^2 + [x3]_+^2)
    F1 = G + L/2 x4^2 + zeta x4
    F2 = G + mu/2 x4^2 - zeta x4

    Stochastic gradients add z ~ N(0, sigma^2) to the third coordinate.
    """

    family = "local_lb"

    def __init__(
        self,
        H: float,
        lam: float,
        mu: float,
        L: float,
        c: float,
        zeta: float,
        sigma: float = 0.0,
        machines: int = 2,
    ):
        """Build the instance.

        Args:
            H: Smoothness
            lam: Strong convexity
            mu: Curvature of the first and (fourth coordinate) second function
            L: Fourth coordinate curvature of the first function
            c: Offset of the first coordinate
            zeta: Heterogeneity parameter
            sigma: Noise standard deviation on the third coordinate
            machines: Number of machines
        """
        self._roles = machine_roles(machines)
        super().__init__(machines, 4)
        self.H = float(H)
        self.lam = float(lam)
        self.mu = float(mu)
        self.L = float(L)
        self.c = float(c)
        self.zeta = float(zeta)
        self.sigma = float(sigma)
        self._offset_two = math.sqrt(self.mu) * self.c / math.sqrt(self.H)
        self._minimizer = self._solve_minimizer()
        self._constants = self._derive_constants()

    @property
    def roles(self) -> list[int]:
        """Function assignment per machine (1, 2, or 3 for padding)."""
        return list(self._roles)

    def _solve_minimizer(self) -> np.ndarray:
        weight = (self.num_machines // 2) / self.num_machines
        pad_weight = (self.num_machines % 2) / self.num_machines
        first = 2 * weight * self.mu * self.c / (2 * weight * self.mu + pad_weight * self.lam)
        second = (
            2 * weight * self.H * self._offset_two
            / (2 * weight * self.H + pad_weight * self.lam)
        )
        return np.array([first, second, 0.0, 0.0])

    def _derive_constants(self) -> ProblemConstants:
        x_star = self._minimizer
        zeta_star = math.sqrt(measure_zeta_star(self, x_star))
        even = self.num_machines % 2 == 0
        zeta_bar = self.zeta if even and self.L == self.mu else math.inf
        gap = self.value(np.zeros(4)) - self.value(x_star)
        return ProblemConstants(
            M=self.num_machines,
            H=self.H,
            lam=self.lam,
            sigma=self.sigma,
            sigma_star=self.sigma,
            zeta_star=zeta_star,
            zeta_bar=max(zeta_bar, zeta_star),
            B=float(np.linalg.norm(x_star)),
            Delta=gap if gap > 0 else None,
        )

    @property
    def constants(self) -> ProblemConstants:
        """Closed-form constants."""
        return self._constants

    @property
    def known_minimizer(self) -> np.ndarray:
        """[c, sqrt(mu) c / sqrt(H), 0, 0] for an even machine count."""
        return self._minimizer.copy()

    def _shared_value(self, x: np.ndarray) -> float:
        positive = max(x[2], 0.0)
        return (
            0.5 * self.mu * (x[0] - self.c) ** 2
            + 0.5 * self.H * (x[1] - self._offset_two) ** 2
            + self.H / 8 * (x[2] ** 2 + positive**2)
        )

    def machine_value(self, machine: int, x: np.ndarray) -> float:
        """Return F_m(x)."""
        role = self._roles[machine]
        if role == _ROLE_PAD:
            return float(0.5 * self.lam * (x @ x))
        if role == _ROLE_FIRST:
            return float(self._shared_value(x) + 0.5 * self.L * x[3] ** 2 + self.zeta * x[3])
        return float(self._shared_value(x) + 0.5 * self.mu * x[3] ** 2 - self.zeta * x[3])

    def machine_gradient(self, machine: int, x: np.ndarray) -> np.ndarray:
        """Return grad F_m(x); the [x3]_+^2 term contributes (H/4)[x3]_+."""
        role = self._roles[machine]
        if role == _ROLE_PAD:
            return self.lam * x
        gradient = np.array(
            [
                self.mu * (x[0] - self.c),
                self.H * (x[1] - self._offset_two),
                self.H / 4 * x[2] + self.H / 4 * max(x[2], 0.0),
                0.0,
            ]
        )
        if role == _ROLE_FIRST:
            gradient[3] = self.L * x[3] + self.zeta
        else:
            gradient[3] = self.mu * x[3] - self.zeta
        return gradient

    def draw_samples(
        self, machine: int, stream: RngStream, steps: int, first_step: int = 0
    ) -> np.ndarray | None:
        """One standard normal per step."""
        if self.sigma == 0:
            return None
        return stream.normals(steps, 1, first_step)

    def stochastic_gradient(
        self, machine: int, x: np.ndarray, sample: np.ndarray | None
    ) -> np.ndarray:
        """Exact gradient with sigma * z added to the third coordinate."""
        gradient = self.machine_gradient(machine, x)
        if sample is not None and self._roles[machine] != _ROLE_PAD:
            gradient[2] += self.sigma * sample[0]
        return gradient

    def stochastic_gradients(
        self, machine: int, x: np.ndarray, samples: np.ndarray | None
    ) -> np.ndarray:
        """Vectorised form at a fixed x."""
        gradient = self.machine_gradient(machine, x)
        if samples is None:
            return gradient[np.newaxis, :]
        gradients = np.repeat(gradient[np.newaxis, :], len(samples), axis=0)
        if self._roles[machine] != _ROLE_PAD:
            gradients[:, 2] += self.sigma * samples[:, 0]
        return gradients


def build_local_lb(
    H: float,
    lam: float,
    mu: float,
    L: float,
    zeta: float,
    sigma: float = 0.0,
    B: float | None = None,
    Delta: float | None = None,
    machines: int = 2,
) -> LocalLBInstance:
    """Build the four-coordinate instance scaled by either B or Delta.

    ``c^2 = B^2 / 2`` when B is given, ``c^2 = Delta / mu`` when Delta is given.

    Args:
        H: Smoothness
        lam: Strong convexity
        mu: Curvature in [lam, H/16], positive
        L: Fourth coordinate curvature in [lam, H] with mu <= 2L
        zeta: Heterogeneity parameter
        sigma: Noise level
        B: Norm scale
        Delta: Suboptimality scale
        machines: Machine count (padding applies when odd)

    Returns:
        LocalLBInstance: The instance
    """
    if not mu > 0:
        raise ParameterRangeError(f"mu must be positive, got {mu}")
    if not lam <= mu <= H / 16:
        raise ParameterRangeError(
            f"mu must lie in [lambda, H/16] = [{lam}, {H / 16}], got {mu}"
        )
    if not lam <= L <= H:
        raise ParameterRangeError(f"L must lie in [lambda, H] = [{lam}, {H}], got {L}")
    if mu > 2 * L:
        raise ParameterRangeError(f"mu must not exceed 2L, got mu={mu}, L={L}")
    if zeta < 0 or sigma < 0:
        raise ParameterRangeError("zeta and sigma must be non-negative")
    if (B is None) == (Delta is None):
        raise ParameterRangeError("exactly one of B and Delta sets the scale")
    if B is not None:
        if not B > 0:
            raise ParameterRangeError(f"B must be positive, got {B}")
        offset = math.sqrt(B * B / 2)
    else:
        assert Delta is not None
        if not Delta > 0:
            raise ParameterRangeError(f"Delta must be positive, got {Delta}")
        offset = math.sqrt(Delta / mu)

    instance = LocalLBInstance(H, lam, mu, L, offset, zeta, sigma, machines)
    instance.description = {
        "family": LocalLBInstance.family,
        "H": H,
        "lam": lam,
        "mu": mu,
        "L": L,
        "zeta": zeta,
        "sigma": sigma,
        "machines": machines,
    }
    if B is not None:
        instance.description["B"] = B
    else:
        instance.description["Delta"] = Delta
    logger.debug(f"Built local_lb instance with c={offset}, x*={instance.known_minimizer}")
    return instance


def closed_form_x4_trajectory(
    L: float, mu: float, zeta: float, eta: float, K: int, R: int
) -> list[float]:
    """Round-start values of the averaged fourth coordinate under noiseless Local SGD.

    x_{r+1} = 0.5 (zeta/mu - zeta/L + (1 - mu eta)^K (x_r - zeta/mu)
                   + (1 - L eta)^K (x_r + zeta/L)), starting from 0.

    Args:
        L: Curvature of the first machine
        mu: Curvature of the second machine
        zeta: Heterogeneity parameter
        eta: Constant stepsize, at most 1/L
        K: Local steps per round
        R: Rounds

    Returns:
        list[float]: x_1, ..., x_R
    """
    if eta > 1 / L:
        raise ParameterRangeError(f"stepsize {eta} exceeds 1/L = {1 / L}")
    if eta < 0:
        raise ParameterRangeError(f"stepsize must be non-negative, got {eta}")
    if mu > 2 * L:
        raise ParameterRangeError(f"mu must not exceed 2L, got mu={mu}, L={L}")
    if K < 1 or R < 0:
        raise ParameterRangeError(f"need K >= 1 and R >= 0, got K={K}, R={R}")
    contraction_mu = (1 - mu * eta) ** K
    contraction_l = (1 - L * eta) ** K
    value = 0.0
    trajectory = []
    for _ in range(R):
        value = 0.5 * (
            zeta / mu
            - zeta / L
            + contraction_mu * (value - zeta / mu)
            + contraction_l * (value + zeta / L)
        )
        trajectory.append(value)
    return trajectory


def local_lb_floor(instance: LocalLBInstance, R: int) -> float:
    """Heterogeneity floor min{mu c^2/4 e^{-6 mu R/H}, H zeta^2/(512 mu^2 R^2)}."""
    if R < 1:
        raise ParameterRangeError(f"R must be at least 1, got {R}")
    mu, c, H = instance.mu, instance.c, instance.H
    return min(
        mu * c * c / 4 * math.exp(-6 * mu * R / H),
        H * instance.zeta**2 / (512 * mu * mu * R * R),
    )


class ChainInstance(QuadraticObjective):
    """Chain quadratics that release one coordinate per communication round.

    F1 = (H-lam)/8 (x1^2 - 2C x1 + beta xd^2 + sum_{i<d/2} (x_{2i+1} - x_{2i})^2) + lam/2 ||x||^2
    F2 = (H-lam)/8 sum_{i<=d/2} (x_{2i} - x_{2i-1})^2 + lam/2 ||x||^2
    """

    family = "chain"

    def __init__(self, H: float, lam: float, C: float, d: int, machines: int = 2):
        """Build the chain.

        Args:
            H: Smoothness, at least 7 lambda
            lam: Strong convexity, positive
            C: Scale
            d: Dimension, even
            machines: Machine count (padding applies when odd)
        """
        if not (lam > 0 and H >= 7 * lam):
            raise ParameterRangeError(f"need H >= 7 lambda > 0, got H={H}, lambda={lam}")
        if not C > 0:
            raise ParameterRangeError(f"C must be positive, got {C}")
        if d < 2 or d % 2:
            raise ParameterRangeError(f"d must be a positive even integer, got {d}")
        self.H = float(H)
        self.lam = float(lam)
        self.C = float(C)
        self.alpha = math.sqrt(1 + (H - lam) / (2 * lam))
        self.q = (self.alpha - 1) / (self.alpha + 1)
        self.beta = 1 - self.q
        self._chain_machines = machines
        hessians, linear = self._build_system(d, machines)
        super().__init__(hessians, linear, sigma=0.0, smoothness=H, strong_convexity=lam)

    def _build_system(self, d: int, machines: int) -> tuple[np.ndarray, np.ndarray]:
        scale = (self.H - self.lam) / 4
        first = self.lam * np.eye(d)
        second = self.lam * np.eye(d)
        first[0, 0] += scale
        first[d - 1, d - 1] += scale * self.beta
        for left in range(1, d - 1, 2):
            _add_difference(first, left, left + 1, scale)
        for left in range(0, d, 2):
            _add_difference(second, left, left + 1, scale)
        first_linear = np.zeros(d)
        first_linear[0] = scale * self.C

        hessians = []
        linear = []
        for role in machine_roles(machines):
            if role == _ROLE_FIRST:
                hessians.append(first)
                linear.append(first_linear)
            elif role == _ROLE_SECOND:
                hessians.append(second)
                linear.append(np.zeros(d))
            else:
                hessians.append(self.lam * np.eye(d))
                linear.append(np.zeros(d))
        return np.array(hessians), np.array(linear)

    def _solve_minimizer(self) -> np.ndarray | None:
        if self._chain_machines % 2 == 0:
            return self.closed_form_minimizer()
        return super()._solve_minimizer()

    def closed_form_minimizer(self) -> np.ndarray:
        """x* = C sum_i q^i e_i for the two-function split."""
        powers = np.arange(1, self.dimension + 1)
        return self.C * self.q**powers

    @property
    def closed_form_optimal_value(self) -> float:
        """F* = -q C^2 (H - lam) / 16 for the two-function split."""
        return -self.q * self.C**2 * (self.H - self.lam) / 16


def _add_difference(matrix: np.ndarray, left: int, right: int, scale: float) -> None:
    matrix[left, left] += scale
    matrix[right, right] += scale
    matrix[left, right] -= scale
    matrix[right, left] -= scale


def chain_dimension(H: float, lam: float, R: int) -> int:
    """Smallest even d with d >= R + 1/(2 ln(1/q))."""
    alpha = math.sqrt(1 + (H - lam) / (2 * lam))
    q = (alpha - 1) / (alpha + 1)
    return 2 * math.ceil((R + 1 / (2 * math.log(1 / q))) / 2)


def build_chain(
    H: float, lam: float, C: float, R: int, machines: int = 2
) -> ChainInstance:
    """Build the chain sized for a round budget R.

    Args:
        H: Smoothness
        lam: Strong convexity, H >= 7 lam > 0
        C: Scale, positive
        R: Target round budget
        machines: Machine count

    Returns:
        ChainInstance: The instance with d = 2 ceil((R + 1/(2 ln(1/q)))/2)
    """
    if not (lam > 0 and H >= 7 * lam):
        raise ParameterRangeError(f"need H >= 7 lambda > 0, got H={H}, lambda={lam}")
    if R < 1:
        raise ParameterRangeError(f"R must be at least 1, got {R}")
    instance = ChainInstance(H, lam, C, chain_dimension(H, lam, R), machines)
    instance.description = {
        "family": ChainInstance.family,
        "H": H,
        "lam": lam,
        "C": C,
        "R": R,
        "machines": machines,
    }
    return instance


def chain_scale(
    H: float, lam: float, zeta: float, Delta: float | None = None, B: float | None = None
) -> float:
    """Pick C from the heterogeneity and scale targets.

    C^2 = 16 min{zeta^2/(alpha H^2), Delta/H} with Delta, or
    C^2 = 4 min{zeta^2/(alpha H^2), B^2/alpha} with B.
    """
    alpha = math.sqrt(1 + (H - lam) / (2 * lam))
    if Delta is not None:
        return math.sqrt(16 * min(zeta * zeta / (alpha * H * H), Delta / H))
    if B is not None:
        return math.sqrt(4 * min(zeta * zeta / (alpha * H * H), B * B / alpha))
    raise ParameterRangeError("one of Delta and B is required to pick C")


def chain_residual_lower_bound(instance: ChainInstance, R: int) -> float:
    """Suboptimality floor for any point supported on the first R coordinates.

    (F(0) - F*) (q^{2R} - q^{2d}) / alpha, and 0 once R reaches d.
    """
    if R < 0:
        raise ParameterRangeError(f"R must be non-negative, got {R}")
    d = instance.dimension
    if R >= d:
        return 0.0
    optimal = instance.known_optimal_value
    assert optimal is not None
    gap = instance.value(np.zeros(d)) - optimal
    return gap * (instance.q ** (2 * R) - instance.q ** (2 * d)) / instance.alpha


def respects_residual_floor(
    gap: float, floor: float, optimal_value: float, tolerance: float = 1e-9
) -> bool:
    """True when a suboptimality gap sits on or above the residual floor.

    The comparison allows a relative ``tolerance`` on the floor plus an absolute
    rounding slack of 1e-12 max(1, |F*|); at k = d the floor is 0 and the exact
    restricted minimum comes back as rounding noise around it.
    """
    slack = RESIDUAL_ROUNDING * max(1.0, abs(optimal_value))
    return gap >= floor * (1 - tolerance) - slack


def restricted_minimum(instance: QuadraticObjective, k: int) -> tuple[float, np.ndarray]:
    """Exactly minimise a quadratic over the span of the first k coordinates.

    Returns:
        tuple[float, np.ndarray]: (F(y) - F*, y)
    """
    d = instance.dimension
    if not 0 <= k <= d:
        raise ContractViolationError(f"k must lie in 0..{d}, got {k}")
    hessian, linear = instance.average_system()
    point = np.zeros(d)
    if k:
        point[:k] = scipy.linalg.solve(hessian[:k, :k], linear[:k], assume_a="pos")
    optimal = instance.known_optimal_value
    if optimal is None:
        raise ContractViolationError("restricted_minimum needs a known optimum")
    return instance.value(point) - optimal, point


def random_quadratic(
    seed: int,
    index: int,
    dimension: int = 5,
    machines: int = 4,
    strongly_convex: bool = True,
    shared_hessian: bool = False,
    sigma: float = 0.0,
    heterogeneity: float = 1.0,
    smoothness: float = 1.0,
    condition: float = 10.0,
) -> QuadraticObjective:
    """Generate one member of a random quadratic suite.

    Curvatures are log-uniform in [smoothness/condition, smoothness]. Local
    minimizers are a shared centre plus ``heterogeneity`` times a per-machine
    normal offset. The member depends only on (seed, index).

    Returns:
        QuadraticObjective: The instance, described so it can be rebuilt
    """
    if condition < 1:
        raise ParameterRangeError(f"condition must be at least 1, got {condition}")
    stream = RngStream(seed, index, 0, 0, StreamPurpose.DATA)
    layouts = 1 if shared_hessian else machines
    eigen_draws = stream.uniforms(1, layouts * dimension, first_step=0)[0]
    rotation_draws = stream.normals(1, layouts * dimension * dimension, first_step=1)[0]
    centre = stream.normals(1, dimension, first_step=2)[0]
    offsets = stream.normals(1, machines * dimension, first_step=3)[0]

    floor = smoothness / condition
    hessians = []
    for layout in range(layouts):
        exponents = eigen_draws[layout * dimension : (layout + 1) * dimension]
        eigenvalues = floor * condition**exponents
        # pin the extremes so the declared constants are attained
        eigenvalues[0] = smoothness
        if dimension > 1:
            eigenvalues[-1] = floor
        block = rotation_draws[
            layout * dimension * dimension : (layout + 1) * dimension * dimension
        ].reshape(dimension, dimension)
        rotation, _ = scipy.linalg.qr(block)
        hessian = rotation @ np.diag(eigenvalues) @ rotation.T
        hessians.append(0.5 * (hessian + hessian.T))
    if shared_hessian:
        hessians = hessians * machines

    linear = []
    for machine in range(machines):
        local_minimizer = centre + heterogeneity * offsets[
            machine * dimension : (machine + 1) * dimension
        ]
        linear.append(hessians[machine] @ local_minimizer)

    instance = QuadraticObjective(
        np.array(hessians),
        np.array(linear),
        sigma=sigma,
        smoothness=smoothness,
        strong_convexity=floor if strongly_convex else 0.0,
    )
    instance.description = {
        "family": QuadraticObjective.family,
        "seed": seed,
        "index": index,
        "dimension": dimension,
        "machines": machines,
        "strongly_convex": strongly_convex,
        "shared_hessian": shared_hessian,
        "sigma": sigma,
        "heterogeneity": heterogeneity,
        "smoothness": smoothness,
        "condition": condition,
    }
    return instance


def random_quadratic_suite(count: int, seed: int, **kwargs: Any) -> list[QuadraticObjective]:
    """Generate ``count`` independent suite members (see ``random_quadratic``)."""
    return [random_quadratic(seed, index, **kwargs) for index in range(count)]


_BUILDERS = {
    LocalLBInstance.family: build_local_lb,
    ChainInstance.family: build_chain,
    QuadraticObjective.family: random_quadratic,
}

SYNTHETIC_FAMILIES: Sequence[str] = tuple(_BUILDERS)


def instance_from_description(description: dict[str, Any]) -> DistributedObjective:
    """Rebuild a synthetic instance from its JSON description.

    Args:
        description: ``{"family": ..., <parameters>}``

    Returns:
        DistributedObjective: The rebuilt instance
    """
    params = dict(description)
    family = params.pop("family", None)
    if family not in _BUILDERS:
        raise ContractViolationError(
            f"unknown instance family '{family}', expected one of {sorted(_BUILDERS)}"
        )
    return _BUILDERS[family](**params)  # type: ignore[operator]
