# pylint: skip-file
# ruff: noqa
from types import SimpleNamespace

import numpy as np
import pytest

from opentaskpy.addons.hetsgd.exceptions import ContractViolationError
from opentaskpy.addons.hetsgd.harness.lbcheck import chain_runs
from opentaskpy.addons.hetsgd.harness.support import (
    SupportTracker,
    check_support_progress,
    support_of,
)
from opentaskpy.addons.hetsgd.instances import build_chain
from opentaskpy.addons.hetsgd.optimizers.geometry import CommGeometry
from opentaskpy.addons.hetsgd.optimizers.runners import run_minibatch_sgd
from opentaskpy.addons.hetsgd.optimizers.schedules import ScheduleSpec


def test_support_of_uses_threshold():
    x = np.array([0.0, 1e-15, 1e-3, -2.0])
    assert support_of(x) == frozenset({2, 3})
    assert support_of(x, threshold=1e-2) == frozenset({3})


def test_tracker_records_rounds():
    tracker = SupportTracker(2)
    tracker.start_round()
    tracker.observe(0, np.array([1.0, 0.0, 0.0]))
    tracker.observe(0, np.array([0.0, 0.0, 0.0]))
    tracker.merge(1, frozenset({1}))
    tracker.end_round(np.array([0.5, 0.5, 0.0]))
    assert tracker.rounds == [[frozenset({0}), frozenset({1})]]
    assert tracker.communicated == [frozenset({0, 1})]


def test_tracker_needs_an_open_round():
    tracker = SupportTracker(1)
    with pytest.raises(ContractViolationError) as ex:
        tracker.observe(0, np.zeros(2))
    assert "observe called outside a round" in str(ex.value)
    with pytest.raises(ContractViolationError) as ex:
        tracker.end_round(np.zeros(2))
    assert "end_round called outside a round" in str(ex.value)


@pytest.mark.parametrize("name", ["minibatch", "local", "inner_outer", "acsa", "multistage_acsa"])
def test_optimizers_are_zero_respecting_on_the_chain(name):
    run = chain_runs(seed=0)[name]
    assert len(run.support_history) == 3
    verdict = check_support_progress(run)
    assert verdict.passed, verdict.violation


def test_dense_start_is_caught():
    chain = build_chain(9.0, 1.0, 1.0, R=3)
    run = run_minibatch_sgd(
        chain,
        CommGeometry(2, 2, 3),
        ScheduleSpec.constant(1 / 36),
        seed=0,
        x0=np.ones(chain.dimension),
        record_support=True,
    )
    verdict = check_support_progress(run)
    assert not verdict
    assert verdict.violation == (1, 0, 2)


def test_first_violation_is_reported():
    run = SimpleNamespace(
        support_history=[
            [frozenset({0}), frozenset()],
            [frozenset({0, 1}), frozenset({0, 3})],
        ],
        communicated_support=[frozenset({0}), frozenset({0, 1})],
    )
    assert check_support_progress(run).violation == (2, 1, 4)


def test_communicated_union_is_checked():
    run = SimpleNamespace(
        support_history=[[frozenset({0}), frozenset({0})]],
        communicated_support=[frozenset({0, 1})],
    )
    assert check_support_progress(run).violation == (1, -1, 2)


def test_missing_support_history():
    with pytest.raises(ContractViolationError) as ex:
        check_support_progress(SimpleNamespace(support_history=None))
    assert "rerun with record_support=True" in str(ex.value)
