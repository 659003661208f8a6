# pylint: skip-file
# ruff: noqa
import math

import numpy as np
import pytest

from opentaskpy.addons.hetsgd.exceptions import (
    ContractViolationError,
    MinimizerRequiredError,
    ParameterRangeError,
)
from opentaskpy.addons.hetsgd.instances import build_chain, build_local_lb, random_quadratic
from opentaskpy.addons.hetsgd.objective import (
    UNBOUNDED,
    ProblemConstants,
    QuadraticObjective,
    average_gradient,
    estimate_sigma_star,
    measure_zeta_star,
    minibatch_gradient,
)
from opentaskpy.addons.hetsgd.optimizers.engine import round_participants
from opentaskpy.addons.hetsgd.optimizers.geometry import CommGeometry
from opentaskpy.addons.hetsgd.rng import RngStream
from tests.fixtures.oracles import *  # noqa: F403

FLOOR_PARAMS = {"H": 64.0, "lam": 1.0, "mu": 1.0, "L": 32.0, "Delta": 1.0}


def isotropic_quadratic(machines, linear, sigma):
    hessians = np.array([np.eye(1) for _ in range(machines)])
    return QuadraticObjective(hessians, np.array(linear, dtype=float).reshape(machines, 1), sigma=sigma)


def test_constants_validation():
    with pytest.raises(ParameterRangeError) as ex:
        ProblemConstants(M=2, H=1.0, lam=2.0, sigma=0, sigma_star=0, zeta_star=0, zeta_bar=0, B=1.0)
    assert "lambda must lie in [0, H]" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        ProblemConstants(M=2, H=1.0, lam=0, sigma=1, sigma_star=2, zeta_star=0, zeta_bar=0, B=1.0)
    assert "exceeds sigma" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        ProblemConstants(M=2, H=1.0, lam=0, sigma=0, sigma_star=0, zeta_star=2, zeta_bar=1, B=1.0)
    assert "exceeds zeta_bar" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        ProblemConstants(M=2, H=1.0, lam=0, sigma=0, sigma_star=0, zeta_star=0, zeta_bar=0)
    assert "at least one of B and Delta" in str(ex.value)


def test_constants_unbounded_zeta_bar_round_trip():
    constants = ProblemConstants(
        M=3, H=2.0, lam=0.5, sigma=1.0, sigma_star=0.5, zeta_star=1.0, zeta_bar=math.inf, Delta=4.0
    )
    values = constants.to_dict()
    assert values["zeta_bar"] == UNBOUNDED
    assert ProblemConstants.from_dict(values) == constants
    assert constants.strongly_convex
    assert "B" not in constants.bound_values()
    assert constants.bound_values()["Delta"] == 4.0


def test_minibatch_variance_law():
    # sigma = 2, M = 4, K = 5: Var = sigma^2 / (M K) = 0.2
    obj = isotropic_quadratic(4, [0.0, 0.0, 0.0, 0.0], sigma=2.0)
    x = np.array([0.5])
    exact = average_gradient(obj, x)
    draws = np.array(
        [minibatch_gradient(obj, x, 5, seed=17, round_index=r)[0] for r in range(100_000)]
    )
    assert abs(draws.mean() - exact[0]) < 4 * math.sqrt(0.2 / len(draws))
    assert draws.var() == pytest.approx(0.2, rel=0.02)


def test_subset_variance_at_optimum():
    # M = 50, S = 10, K = 2, sigma_star = 2, zeta_star = 1
    M, S, K = 50, 10, 2
    obj = isotropic_quadratic(M, [1.0 if m % 2 else -1.0 for m in range(M)], sigma=2.0)
    x_star = obj.known_minimizer
    assert x_star == pytest.approx([0.0])
    assert obj.constants.zeta_star == pytest.approx(1.0)
    geometry = CommGeometry(M, K, 1, S)
    draws = []
    for r in range(100_000):
        machines = round_participants(geometry, 23, 0, r)
        draws.append(minibatch_gradient(obj, x_star, K, 23, round_index=r, machines=machines)[0])
    expected = 4.0 / (S * K) + (1 - S / M) * 1.0 / S
    assert np.var(draws) == pytest.approx(expected, rel=0.05)


def test_stochastic_gradients_unbiased():
    obj = build_local_lb(**FLOOR_PARAMS, zeta=1.0, sigma=1.5)
    x = np.array([0.1, -0.2, 0.3, 0.4])
    n = 100000
    for machine in range(obj.num_machines):
        samples = obj.draw_samples(machine, RngStream(5, 0, machine, 0), n)
        gradients = obj.stochastic_gradients(machine, x, samples)
        exact = obj.machine_gradient(machine, x)
        assert np.all(np.abs(gradients.mean(axis=0) - exact) <= 4 * 1.5 / math.sqrt(n) + 1e-12)

    quadratic = random_quadratic(4, 0, sigma=1.0)
    point = np.linspace(-1, 1, quadratic.dimension)
    samples = quadratic.draw_samples(1, RngStream(6, 0, 1, 0), n)
    gradients = quadratic.stochastic_gradients(1, point, samples)
    spread = 1.0 / math.sqrt(quadratic.dimension)
    assert np.all(
        np.abs(gradients.mean(axis=0) - quadratic.machine_gradient(1, point)) <= 4 * spread / math.sqrt(n)
    )


def test_optimality_of_known_minimizers():
    instances = [
        build_local_lb(**FLOOR_PARAMS, zeta=10.0),
        build_local_lb(**FLOOR_PARAMS, zeta=10.0, machines=3),
        build_chain(9.0, 1.0, 1.0, R=3),
        random_quadratic(1, 2),
    ]
    for obj in instances:
        assert np.all(np.abs(average_gradient(obj, obj.known_minimizer)) <= 1e-8)


def test_gradients_match_finite_differences():
    x = np.array([0.3, -0.7, 0.9, 0.2])
    obj = build_local_lb(**FLOOR_PARAMS, zeta=2.0)
    for machine in range(2):
        numeric = finite_difference_gradient(lambda y: obj.machine_value(machine, y), x)
        assert relative_error(obj.machine_gradient(machine, x), numeric) < 1e-6

    quadratic = random_quadratic(2, 5, dimension=4)
    numeric = finite_difference_gradient(quadratic.value, x)
    assert relative_error(quadratic.gradient(x), numeric) < 1e-6


def test_gradients_are_lipschitz_in_H():
    obj = random_quadratic(8, 1, dimension=6, smoothness=3.0)
    H = obj.constants.H
    pairs = RngStream(8).normals(20, 12)
    for row in pairs:
        x, y = row[:6], row[6:]
        for machine in range(obj.num_machines):
            difference = obj.machine_gradient(machine, x) - obj.machine_gradient(machine, y)
            assert np.linalg.norm(difference) <= H * np.linalg.norm(x - y) * (1 + 1e-9)


def test_zeta_star_local_lb():
    obj = build_local_lb(**FLOOR_PARAMS, zeta=3.0)
    assert obj.known_minimizer == pytest.approx([1.0, 1.0 / 8.0, 0.0, 0.0])
    assert measure_zeta_star(obj) == pytest.approx(9.0)
    assert obj.constants.zeta_star == pytest.approx(3.0)


def test_zeta_star_requires_minimizer():
    hessians = np.array([np.diag([1.0, 0.0]), np.diag([1.0, 0.0])])
    linear = np.array([[0.0, 1.0], [0.0, 1.0]])
    obj = QuadraticObjective(hessians, linear)
    assert obj.known_minimizer is None
    assert obj.known_optimal_value is None
    with pytest.raises(MinimizerRequiredError) as ex:
        measure_zeta_star(obj)
    assert "minimizer required for measure_zeta_star" in str(ex.value)
    # an explicit minimizer is accepted
    assert measure_zeta_star(obj, np.zeros(2)) == pytest.approx(1.0)


def test_sigma_star_estimate():
    obj = build_local_lb(**FLOOR_PARAMS, zeta=1.0, sigma=2.0)
    assert estimate_sigma_star(obj, 100000, seed=3) == pytest.approx(4.0, rel=0.1)
    assert estimate_sigma_star(build_local_lb(**FLOOR_PARAMS, zeta=1.0), 10) == 0.0
    with pytest.raises(ParameterRangeError) as ex:
        estimate_sigma_star(obj, 0)
    assert "draws must be at least 1" in str(ex.value)


def test_oracle_contracts():
    obj = random_quadratic(0, 0, dimension=3)
    with pytest.raises(ContractViolationError) as ex:
        obj.value(np.zeros(4))
    assert "expected a vector of dimension 3" in str(ex.value)
    with pytest.raises(ContractViolationError) as ex:
        obj.check_machine(4)
    assert "machine index 4 outside 0..3" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        minibatch_gradient(obj, np.zeros(3), 0, seed=1)
    assert "K must be at least 1" in str(ex.value)


def test_noiseless_minibatch_gradient_is_exact():
    obj = build_chain(9.0, 1.0, 1.0, R=3)
    x = np.linspace(0.1, 0.4, obj.dimension)
    assert np.array_equal(minibatch_gradient(obj, x, 7, seed=1), average_gradient(obj, x))


def test_quadratic_rejects_bad_shapes():
    with pytest.raises(ContractViolationError) as ex:
        QuadraticObjective(np.eye(2), np.zeros(2))
    assert "hessians must have shape (M, d, d)" in str(ex.value)
    with pytest.raises(ContractViolationError) as ex:
        QuadraticObjective(np.array([[[1.0, 2.0], [0.0, 1.0]]]), np.zeros((1, 2)))
    assert "symmetric" in str(ex.value)
