# pylint: skip-file
# ruff: noqa
import math

import numpy as np
import pytest
import scipy.optimize

from opentaskpy.addons.hetsgd.exceptions import ContractViolationError, ParameterRangeError
from opentaskpy.addons.hetsgd.instances import (
    build_chain,
    build_local_lb,
    chain_dimension,
    chain_residual_lower_bound,
    chain_scale,
    closed_form_x4_trajectory,
    instance_from_description,
    local_lb_floor,
    machine_roles,
    random_quadratic,
    random_quadratic_suite,
    respects_residual_floor,
    restricted_minimum,
)

FLOOR_PARAMS = {"H": 64.0, "lam": 1.0, "mu": 1.0, "L": 32.0, "Delta": 1.0}


def test_machine_roles():
    assert machine_roles(2) == [1, 2]
    assert machine_roles(4) == [1, 1, 2, 2]
    assert machine_roles(5) == [1, 1, 2, 2, 3]
    with pytest.raises(ParameterRangeError) as ex:
        machine_roles(1)
    assert "at least 2 machines" in str(ex.value)


def test_local_lb_ranges():
    with pytest.raises(ParameterRangeError) as ex:
        build_local_lb(64.0, 1.0, 5.0, 32.0, zeta=1.0, Delta=1.0)
    assert "mu must lie in [lambda, H/16]" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        build_local_lb(64.0, 1.0, 1.0, 100.0, zeta=1.0, Delta=1.0)
    assert "L must lie in [lambda, H]" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        build_local_lb(64.0, 1.0, 1.0, 32.0, zeta=1.0, B=1.0, Delta=1.0)
    assert "exactly one of B and Delta" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        build_local_lb(64.0, 1.0, 1.0, 32.0, zeta=-1.0, Delta=1.0)
    assert "non-negative" in str(ex.value)


def test_local_lb_scale_and_constants():
    by_delta = build_local_lb(**FLOOR_PARAMS, zeta=2.0)
    assert by_delta.c == pytest.approx(1.0)
    # F(0) - F* equals mu c^2 when c^2 = Delta / mu
    assert by_delta.constants.Delta == pytest.approx(1.0)

    by_radius = build_local_lb(64.0, 1.0, 1.0, 32.0, zeta=2.0, B=2.0)
    assert by_radius.c == pytest.approx(math.sqrt(2.0))

    # zeta_bar is only finite when the fourth coordinate curvatures agree
    assert math.isinf(by_delta.constants.zeta_bar)
    matched = build_local_lb(64.0, 1.0, 1.0, 1.0, zeta=2.0, Delta=1.0)
    assert matched.constants.zeta_bar == pytest.approx(2.0)
    assert matched.constants.zeta_star == pytest.approx(2.0)


def test_local_lb_description_round_trip():
    obj = build_local_lb(**FLOOR_PARAMS, zeta=4.0, sigma=0.5, machines=3)
    rebuilt = instance_from_description(obj.describe())
    point = np.array([0.2, 0.1, -0.3, 0.7])
    assert rebuilt.value(point) == obj.value(point)
    assert rebuilt.roles == [1, 2, 3]


def test_x4_trajectory():
    trajectory = closed_form_x4_trajectory(32.0, 1.0, 1.0, 0.01, 3, 4)
    assert len(trajectory) == 4
    assert trajectory[0] != 0.0
    # zeta = 0 keeps the fourth coordinate at zero
    assert closed_form_x4_trajectory(32.0, 1.0, 0.0, 0.01, 3, 4) == [0.0] * 4
    with pytest.raises(ParameterRangeError) as ex:
        closed_form_x4_trajectory(32.0, 1.0, 1.0, 0.05, 3, 4)
    assert "exceeds 1/L" in str(ex.value)


def test_local_lb_floor():
    obj = build_local_lb(**FLOOR_PARAMS, zeta=10.0)
    expected = min(
        1.0 / 4 * math.exp(-6 * 4 / 64.0),
        64.0 * 100.0 / (512 * 16),
    )
    assert local_lb_floor(obj, 4) == pytest.approx(expected)
    with pytest.raises(ParameterRangeError):
        local_lb_floor(obj, 0)


def test_chain_geometry():
    obj = build_chain(9.0, 1.0, 1.0, R=3)
    assert obj.dimension == 4
    root = scipy.optimize.brentq(lambda q: 1 - 3 * q + q * q, 0.0, 1.0)
    assert abs(obj.q - root) <= 1e-9
    x_star = obj.known_minimizer
    assert np.linalg.norm(obj.gradient(x_star)) < 1e-8
    assert obj.value(x_star) == pytest.approx(obj.closed_form_optimal_value, rel=1e-10)
    assert obj.constants.H == 9.0
    assert obj.constants.lam == 1.0


def test_chain_dimension_grows_with_rounds():
    dims = [chain_dimension(9.0, 1.0, R) for R in range(1, 9)]
    assert all(d % 2 == 0 for d in dims)
    assert all(d >= R for d, R in zip(dims, range(1, 9)))
    assert dims == sorted(dims)


def test_chain_ranges():
    with pytest.raises(ParameterRangeError) as ex:
        build_chain(5.0, 1.0, 1.0, R=3)
    assert "need H >= 7 lambda > 0" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        build_chain(9.0, 1.0, 1.0, R=0)
    assert "R must be at least 1" in str(ex.value)


def test_odd_machine_chain_is_solved():
    obj = build_chain(9.0, 1.0, 1.0, R=3, machines=3)
    assert np.linalg.norm(obj.gradient(obj.known_minimizer)) < 1e-8


def test_restricted_minima_respect_residual_floor():
    for R in (1, 2, 3, 4, 5, 6):
        obj = build_chain(9.0, 1.0, 1.0, R=R)
        assert obj.dimension <= 8
        gaps = []
        for k in range(obj.dimension + 1):
            gap, point = restricted_minimum(obj, k)
            assert np.all(point[k:] == 0.0)
            floor = chain_residual_lower_bound(obj, k)
            assert respects_residual_floor(gap, floor, obj.closed_form_optimal_value)
            gaps.append(gap)
        assert gaps[-1] == pytest.approx(0.0, abs=1e-12)
        assert all(a >= b - 1e-12 for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ContractViolationError):
        restricted_minimum(build_chain(9.0, 1.0, 1.0, R=3), 5)


def test_chain_scale():
    alpha = math.sqrt(1 + 8.0 / 2)
    assert chain_scale(9.0, 1.0, zeta=0.1, Delta=10.0) == pytest.approx(
        math.sqrt(16 * 0.01 / (alpha * 81))
    )
    assert chain_scale(9.0, 1.0, zeta=100.0, B=1.0) == pytest.approx(math.sqrt(4 / alpha))
    with pytest.raises(ParameterRangeError):
        chain_scale(9.0, 1.0, zeta=1.0)


def test_random_quadratic_is_a_function_of_seed_and_index():
    first = random_quadratic(5, 3)
    again = random_quadratic(5, 3)
    other = random_quadratic(5, 4)
    assert np.array_equal(first.hessians, again.hessians)
    assert not np.array_equal(first.hessians, other.hessians)
    assert first.constants.H == 1.0
    assert first.constants.lam == pytest.approx(0.1)
    assert first.constants.H == pytest.approx(max(np.linalg.eigvalsh(first.hessians[0])))


def test_random_quadratic_suite_options():
    suite = random_quadratic_suite(3, 9, shared_hessian=True, strongly_convex=False, sigma=0.3)
    assert len(suite) == 3
    for obj in suite:
        assert math.isfinite(obj.constants.zeta_bar)
        assert obj.constants.lam == 0.0
        assert obj.constants.sigma == 0.3
        rebuilt = instance_from_description(obj.describe())
        assert np.array_equal(rebuilt.hessians, obj.hessians)


def test_instance_from_description_unknown_family():
    with pytest.raises(ContractViolationError) as ex:
        instance_from_description({"family": "ring"})
    assert "unknown instance family 'ring'" in str(ex.value)


def test_full_span_minimum_sits_on_a_zero_floor():
    obj = build_chain(9.0, 1.0, 1.0, R=1)
    d = obj.dimension
    gap, _ = restricted_minimum(obj, d)
    floor = chain_residual_lower_bound(obj, d)
    assert floor == 0.0
    assert abs(gap) < 1e-12
    assert respects_residual_floor(gap, floor, obj.closed_form_optimal_value)
    assert respects_residual_floor(-2.7755575615628914e-17, 0.0, obj.closed_form_optimal_value)
    assert not respects_residual_floor(-1e-6, 0.0, obj.closed_form_optimal_value)
    assert not respects_residual_floor(0.5, 1.0, obj.closed_form_optimal_value)
