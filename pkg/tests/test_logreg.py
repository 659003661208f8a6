# pylint: skip-file
# ruff: noqa
import gzip
import struct

import numpy as np
import pytest

from opentaskpy.addons.hetsgd.exceptions import (
    CacheFormatError,
    IdxFormatError,
    ParameterRangeError,
)
from opentaskpy.addons.hetsgd.logreg.cache import decode_cache, encode_cache, read_cache, write_cache
from opentaskpy.addons.hetsgd.logreg.idx import load_idx_pair, parse_idx, read_idx_files, write_idx
from opentaskpy.addons.hetsgd.logreg.newton import DEFAULT_TOLERANCE, newton_solve
from opentaskpy.addons.hetsgd.logreg.objective import LogisticObjective
from opentaskpy.addons.hetsgd.logreg.pca import pca_reduce
from opentaskpy.addons.hetsgd.logreg.pipeline import (
    attach_optimum,
    build_logistic_objective,
    measure_zeta_profile,
    prepare_idx,
)
from opentaskpy.addons.hetsgd.logreg.surrogate import synth_digits
from opentaskpy.addons.hetsgd.logreg.tasks import TASKS, build_tasks_and_assign, label_sign
from opentaskpy.addons.hetsgd.optimizers.geometry import CommGeometry
from opentaskpy.addons.hetsgd.optimizers.runners import reference_value, run_minibatch_sgd
from opentaskpy.addons.hetsgd.optimizers.schedules import ScheduleSpec
from tests.fixtures.oracles import *  # noqa: F403


@pytest.fixture(scope="module")
def digits_data():
    return synth_digits(11, n_per_digit=30, dim=5)


@pytest.fixture
def raw_images():
    generator = np.random.default_rng(0)
    images = generator.integers(0, 256, size=(20, 4, 4), dtype=np.uint8)
    labels = np.tile(np.arange(10, dtype=np.uint8), 2)
    return images, labels


def test_idx_round_trip(raw_images):
    images, labels = raw_images
    assert np.array_equal(parse_idx(write_idx(images)), images)
    assert np.array_equal(parse_idx(write_idx(labels)), labels)
    assert np.array_equal(parse_idx(gzip.compress(write_idx(images))), images)


def test_idx_files(tmp_path, raw_images):
    images, labels = raw_images
    (tmp_path / "images.idx.gz").write_bytes(gzip.compress(write_idx(images)))
    (tmp_path / "labels.idx").write_bytes(write_idx(labels))
    dataset = read_idx_files(tmp_path / "images.idx.gz", tmp_path / "labels.idx")
    assert len(dataset) == 20
    assert dataset.shape == (4, 4)
    assert dataset.images.shape == (20, 16)
    assert dataset.source["labels"].endswith("labels.idx")


def test_idx_errors(raw_images):
    images, labels = raw_images
    with pytest.raises(IdxFormatError) as ex:
        parse_idx(struct.pack(">II", 0x00000999, 1) + b"\x00")
    assert "unrecognized magic 0x00000999" in str(ex.value)

    with pytest.raises(IdxFormatError) as ex:
        parse_idx(write_idx(images)[:-5])
    assert "short read" in str(ex.value)

    with pytest.raises(IdxFormatError) as ex:
        parse_idx(b"\x00\x00")
    assert "missing IDX magic" in str(ex.value)

    with pytest.raises(IdxFormatError) as ex:
        load_idx_pair(write_idx(images), write_idx(labels + 5))
    assert "labels must lie in 0..9" in str(ex.value)

    with pytest.raises(IdxFormatError) as ex:
        load_idx_pair(write_idx(images), write_idx(labels[:10]))
    assert "20 images but 10 labels" in str(ex.value)

    with pytest.raises(IdxFormatError):
        write_idx(np.zeros((2, 2), dtype=np.uint8))


def test_idx_ignores_trailing_bytes(raw_images):
    _, labels = raw_images
    assert np.array_equal(parse_idx(write_idx(labels) + b"\x07\x07"), labels)


def test_cache_round_trip(tmp_path, digits_data):
    features, digits = digits_data
    path = tmp_path / "digits.cache"
    write_cache(path, features, digits)
    cached_features, cached_digits = read_cache(path)
    assert np.array_equal(cached_features, features)
    assert np.array_equal(cached_digits, digits)
    assert path.read_bytes()[:4] == b"HSGD"


def test_cache_errors(digits_data):
    features, digits = digits_data
    buffer = encode_cache(features, digits)

    with pytest.raises(CacheFormatError) as ex:
        decode_cache(b"XXXX" + buffer[4:])
    assert "bad cache magic" in str(ex.value)

    with pytest.raises(CacheFormatError) as ex:
        decode_cache(buffer[:4] + struct.pack("<H", 9) + buffer[6:])
    assert "unsupported cache version 9" in str(ex.value)

    with pytest.raises(CacheFormatError) as ex:
        decode_cache(buffer[:-1])
    assert "cache should hold" in str(ex.value)

    with pytest.raises(CacheFormatError) as ex:
        decode_cache(buffer[:10])
    assert "cache header truncated" in str(ex.value)

    with pytest.raises(CacheFormatError):
        encode_cache(features, digits[:-1])


def test_pca(digits_data):
    features, _ = digits_data
    projection, basis = pca_reduce(features, 3)
    assert projection.shape == (features.shape[0], 3)
    assert basis.T @ basis == pytest.approx(np.eye(3), abs=1e-10)
    assert np.all(basis[np.argmax(np.abs(basis), axis=0), np.arange(3)] > 0)
    # projected columns are centred and ordered by variance
    assert projection.mean(axis=0) == pytest.approx(np.zeros(3), abs=1e-10)
    variances = projection.var(axis=0)
    assert list(variances) == sorted(variances, reverse=True)


def test_pca_full_rank_reconstructs(digits_data):
    features, _ = digits_data
    projection, basis = pca_reduce(features, features.shape[1])
    rebuilt = projection @ basis.T + features.mean(axis=0)
    assert rebuilt == pytest.approx(features, abs=1e-9)
    with pytest.raises(ParameterRangeError) as ex:
        pca_reduce(features, 0)
    assert "k must lie in 1..min(n, d)" in str(ex.value)


def test_prepare_idx(raw_images):
    images, labels = raw_images
    features, digits = prepare_idx(write_idx(images), write_idx(labels), components=3)
    assert features.shape == (20, 3)
    assert np.array_equal(digits, labels)


def test_newton_on_one_dimensional_data():
    obj = LogisticObjective([np.array([[1.0]]), np.array([[-1.0]])], [np.array([1.0]), np.array([-1.0])], ridge=0.1)
    result = newton_solve(obj)
    assert result.gradient_norm < 1e-10
    assert result.x[0] > 0
    assert abs(float(obj.gradient(result.x)[0])) < 1e-10


def test_logistic_derivatives(digits_data):
    features, digits = digits_data
    obj, _ = build_logistic_objective(features, digits, 0.5, seed=2, machines=3, ridge=0.05)
    x = np.linspace(-0.3, 0.4, obj.dimension)
    assert relative_error(obj.gradient(x), finite_difference_gradient(obj.value, x)) < 1e-6
    assert relative_error(obj.hessian(x), finite_difference_hessian(obj.gradient, x)) < 1e-4


def test_logistic_validation():
    with pytest.raises(ParameterRangeError) as ex:
        LogisticObjective([np.ones((2, 2))], [np.array([1.0, 0.0])])
    assert "labels must be +1 or -1" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        LogisticObjective([np.ones((2, 2))], [np.array([1.0, -1.0])], ridge=-1.0)
    assert "ridge must be non-negative" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        LogisticObjective([np.ones((2, 2))], [np.array([1.0, -1.0])], batch_size=0)
    assert "batch_size must be at least 1" in str(ex.value)


def test_attach_optimum(digits_data):
    features, digits = digits_data
    obj, _ = build_logistic_objective(features, digits, 1.0, seed=2, machines=4, ridge=0.05)
    assert obj.known_minimizer is None
    attached = attach_optimum(obj)
    assert np.linalg.norm(attached.gradient(attached.known_minimizer)) < 1e-9
    assert attached.constants.zeta_star > 0
    assert attached.constants.sigma == 0.0
    assert attached.describe()["p"] == 1.0


def test_newton_optimum_is_lowered_by_a_certified_slack(digits_data):
    features, digits = digits_data
    obj, _ = build_logistic_objective(features, digits, 1.0, seed=2, machines=4, ridge=0.05)
    assert obj.optimum_slack == 0.0
    exact = attach_optimum(obj)
    # a deliberately rough x* so that the slack is visible
    rough = exact.with_minimizer(exact.known_minimizer + 0.05)
    gradient = rough.gradient(rough.known_minimizer)
    assert rough.optimum_slack == pytest.approx(float(gradient @ gradient) / (2 * 0.05))
    assert rough.optimum_slack > exact.optimum_slack >= 0.0

    f_star, mode = reference_value(rough)
    assert mode == "newton"
    assert f_star == pytest.approx(rough.known_optimal_value - rough.optimum_slack)
    assert f_star <= exact.known_optimal_value

    result = run_minibatch_sgd(rough, CommGeometry(4, 2, 10), ScheduleSpec.constant(1 / (4 * rough.constants.H)), seed=3)
    assert result.extras["optimum_slack"] == rough.optimum_slack
    assert result.optimal_value == pytest.approx(f_star)
    assert np.all(result.suboptimality_series >= 0.0)
    assert result.to_dict()["extras"]["optimum_slack"] == rough.optimum_slack

    explicit = run_minibatch_sgd(
        rough, CommGeometry(4, 2, 10), ScheduleSpec.constant(1 / (4 * rough.constants.H)), seed=3,
        optimal_value=exact.known_optimal_value,
    )
    assert explicit.extras["optimum_slack"] == 0.0


def test_unregularized_slack_is_the_newton_tolerance():
    obj = LogisticObjective([np.array([[1.0], [0.5]])], [np.array([1.0, -1.0])])
    assert obj.with_minimizer(np.zeros(1)).optimum_slack == DEFAULT_TOLERANCE


def test_task_assignment(digits_data):
    _, digits = digits_data
    assignment = build_tasks_and_assign(digits, 0.5, seed=4, machines=5)
    assert assignment.num_machines == 5
    assert assignment.n_per_digit == 30
    assert assignment.tasks == TASKS[:5]
    for (even, odd), rows in zip(assignment.tasks, assignment.machine_indices):
        assert len(rows) == 60
        assert len(set(rows[:30].tolist())) == 30
        assert set(digits[rows[:30]].tolist()) <= {even, odd}
    assert assignment.task_counts == (30,) * 5


def test_task_assignment_is_deterministic(digits_data):
    _, digits = digits_data
    first = build_tasks_and_assign(digits, 0.2, seed=4)
    second = build_tasks_and_assign(digits, 0.2, seed=4)
    other = build_tasks_and_assign(digits, 0.2, seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(first.machine_indices, second.machine_indices))
    assert not all(np.array_equal(a, b) for a, b in zip(first.machine_indices, other.machine_indices))
    assert first.num_machines == 25


def test_task_assignment_ranges(digits_data):
    _, digits = digits_data
    with pytest.raises(ParameterRangeError) as ex:
        build_tasks_and_assign(digits, 1.5, seed=1)
    assert "p must lie in [0, 1]" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        build_tasks_and_assign(digits, 0.5, seed=1, machines=26)
    assert "machines must lie in 1..25" in str(ex.value)
    with pytest.raises(ParameterRangeError) as ex:
        build_tasks_and_assign(digits, 0.5, seed=1, n_per_digit=31)
    assert "the rarest digit has 30" in str(ex.value)


def test_label_sign():
    assert list(label_sign(np.array([0, 1, 2, 9]))) == [1.0, -1.0, 1.0, -1.0]


def test_pure_tasks_are_more_heterogeneous(digits_data):
    features, digits = digits_data
    p_grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    profiles = [
        measure_zeta_profile(features, digits, reversed(p_grid), seed, machines=6, ridge=0.01)
        for seed in range(4)
    ]
    for profile in profiles:
        assert [p for p, _ in profile] == p_grid
        assert all(zeta_sq >= 0 for _, zeta_sq in profile)
    samples = np.array([[zeta_sq for _, zeta_sq in profile] for profile in profiles])
    means = samples.mean(axis=0)
    stderrs = samples.std(axis=0, ddof=1) / np.sqrt(len(profiles))
    for i in range(len(p_grid) - 1):
        spread = 2 * np.hypot(stderrs[i], stderrs[i + 1])
        assert means[i + 1] >= means[i] - spread, (p_grid[i], p_grid[i + 1], means)
    assert means[-1] > means[0]


def test_synth_digits(digits_data):
    features, digits = digits_data
    assert features.shape == (300, 5)
    assert np.array_equal(np.bincount(digits), np.full(10, 30))
    again, _ = synth_digits(11, n_per_digit=30, dim=5)
    assert np.array_equal(features, again)
    with pytest.raises(ParameterRangeError):
        synth_digits(1, n_per_digit=0)
