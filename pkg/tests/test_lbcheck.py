# pylint: skip-file
# ruff: noqa
import json

import numpy as np
import pytest

from opentaskpy.addons.hetsgd.exceptions import AcceptanceCheckError, ParameterRangeError
from opentaskpy.addons.hetsgd.harness import lbcheck
from opentaskpy.addons.hetsgd.harness.lbcheck import CheckOutcome, run_lower_bound_checks
from opentaskpy.addons.hetsgd.instances import build_local_lb
from opentaskpy.addons.hetsgd.optimizers.geometry import CommGeometry
from opentaskpy.addons.hetsgd.optimizers.runners import run_local_sgd, run_minibatch_sgd
from opentaskpy.addons.hetsgd.optimizers.schedules import ScheduleSpec
from opentaskpy.addons.hetsgd.rates import crossover_zeta


@pytest.mark.parametrize("suite", list(lbcheck.SUITES))
def test_suite_passes(suite):
    (outcome,) = run_lower_bound_checks([suite])
    assert outcome.suite == suite
    assert outcome.passed, outcome.detail
    assert type(outcome.passed) is bool
    assert json.loads(json.dumps(outcome.to_dict()))["passed"] is True


def test_outcomes_follow_the_requested_order():
    outcomes = run_lower_bound_checks(["chain_geometry", "x4_recursion"])
    assert [outcome.suite for outcome in outcomes] == ["chain_geometry", "x4_recursion"]
    document = outcomes[0].to_dict()
    assert document["passed"] is True
    assert document["measurements"]["dimension"] == 4
    json.dumps([outcome.to_dict() for outcome in outcomes])


def test_local_floor_reports_its_margin():
    (outcome,) = run_lower_bound_checks(["local_floor"])
    assert outcome.measurements["failures"] == []
    assert outcome.measurements["min_ratio"] >= 1.0


@pytest.mark.parametrize("zeta", [33.0, 40.0, 100.0])
def test_local_sgd_loses_to_minibatch_above_the_crossover(zeta):
    M, K, R = lbcheck.FLOOR_GEOMETRY
    geometry = CommGeometry(M, K, R)
    instance = build_local_lb(**lbcheck.FLOOR_INSTANCE, zeta=zeta)
    assert zeta**2 >= crossover_zeta(instance.H, instance.constants.B, R)
    etas = np.geomspace(1e-5, 1 / lbcheck.FLOOR_INSTANCE["L"], lbcheck.FLOOR_GRID_POINTS)

    def best(runner):
        return min(
            runner(
                instance, geometry, ScheduleSpec.constant(float(eta)), 0,
                averaging="last", record_history=False,
            ).final_suboptimality
            for eta in etas
        )

    assert best(run_local_sgd) > best(run_minibatch_sgd)


def test_unknown_suite():
    with pytest.raises(ParameterRangeError) as ex:
        run_lower_bound_checks(["x4_recursion", "spectral_gap"])
    assert "unknown suites ['spectral_gap']" in str(ex.value)


def test_strict_mode(monkeypatch):
    monkeypatch.setitem(
        lbcheck.SUITES, "forced_failure", lambda seed=0: CheckOutcome("forced_failure", False, "forced")
    )
    (outcome,) = run_lower_bound_checks(["forced_failure"])
    assert not outcome.passed
    with pytest.raises(AcceptanceCheckError) as ex:
        run_lower_bound_checks(["forced_failure"], strict=True)
    assert "forced_failure failed: forced" in str(ex.value)
