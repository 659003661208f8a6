# pylint: skip-file
# ruff: noqa
import math

import numpy as np
import pytest

from opentaskpy.addons.hetsgd.exceptions import ParameterRangeError
from opentaskpy.addons.hetsgd.instances import random_quadratic
from opentaskpy.addons.hetsgd.optimizers.acsa import (
    acsa_phi,
    multistage_length,
    run_acsa,
    run_multistage_acsa,
)
from opentaskpy.addons.hetsgd.optimizers.geometry import CommGeometry


@pytest.fixture(scope="module")
def strongly_convex():
    return random_quadratic(31, 0, dimension=4)


@pytest.fixture(scope="module")
def weakly_convex_noisy():
    return random_quadratic(31, 1, dimension=4, strongly_convex=False, sigma=0.5)


def test_phi_and_stage_length():
    assert acsa_phi(2.0, 0.0, 1.0, 1.0, 10) == 4.0
    assert acsa_phi(2.0, 1.0, 0.0, 1.0, 10) == 4.0
    large = acsa_phi(1.0, 1.0, 1e6, 1e-3, 2)
    assert large == pytest.approx(math.sqrt(1e6 / (3 * 1e-3 * 2 * 3 * 4)))
    # noiseless stages only need the condition number term
    assert multistage_length(8.0, 1.0, 0.0, 1.0, 1) == math.ceil(4 * math.sqrt(16.0))


def test_acsa_converges_without_noise(strongly_convex):
    run = run_acsa(strongly_convex, CommGeometry(4, 2, 60), False, seed=1)
    gap = strongly_convex.value(np.zeros(4)) - strongly_convex.known_optimal_value
    assert run.rounds == 60
    assert run.final_suboptimality < 0.1 * gap
    assert run.final_suboptimality >= -1e-12
    assert run.config["algo"] == "acsa"
    assert np.array_equal(run.final_point, run.iterate_history[-1])


def test_acsa_is_deterministic(weakly_convex_noisy):
    geometry = CommGeometry(4, 3, 10)
    first = run_acsa(weakly_convex_noisy, geometry, True, seed=4)
    second = run_acsa(weakly_convex_noisy, geometry, True, seed=4)
    assert np.array_equal(first.iterate_history, second.iterate_history)


def test_regularized_acsa_on_weakly_convex(weakly_convex_noisy):
    geometry = CommGeometry(4, 3, 10)
    with pytest.raises(ParameterRangeError) as ex:
        run_acsa(weakly_convex_noisy, geometry, False, seed=1)
    assert "needs lambda > 0 unless regularize is set" in str(ex.value)
    run = run_acsa(weakly_convex_noisy, geometry, True, seed=1)
    c = weakly_convex_noisy.constants
    assert run.extras["rho"] == pytest.approx(c.sigma / (c.B * math.sqrt(4 * 3 * 10)))
    assert math.isfinite(run.final_suboptimality)


def test_acsa_subset_participation(strongly_convex):
    full = run_acsa(strongly_convex, CommGeometry(4, 2, 10), False, seed=2)
    subset = run_acsa(strongly_convex, CommGeometry(4, 2, 10, 2), False, seed=2)
    # noiseless, but only two machines' gradients enter each round
    assert not np.array_equal(full.iterate_history, subset.iterate_history)


def test_multistage_uses_exactly_the_round_budget(strongly_convex):
    run = run_multistage_acsa(strongly_convex, CommGeometry(4, 2, 25), 1.0, seed=3)
    stages = run.extras["stages"]
    assert sum(stage["iterations"] for stage in stages) == 25
    assert all(stage["iterations"] == stage["length"] for stage in stages[:-1])
    assert stages[-1]["iterations"] <= stages[-1]["length"]
    assert run.rounds == 25


def test_multistage_arguments(strongly_convex, weakly_convex_noisy):
    with pytest.raises(ParameterRangeError) as ex:
        run_multistage_acsa(strongly_convex, CommGeometry(4, 2, 5), 0.0, seed=1)
    assert "Delta must be positive" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        run_multistage_acsa(weakly_convex_noisy, CommGeometry(4, 2, 5), 1.0, seed=1)
    assert "needs lambda > 0" in str(ex.value)
