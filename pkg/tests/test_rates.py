# pylint: skip-file
# ruff: noqa
import math
from itertools import product

import pytest

from opentaskpy.addons.hetsgd.exceptions import MissingParameterError, ParameterRangeError
from opentaskpy.addons.hetsgd.rates import (
    ACCELERATED_MB_OPTIMAL,
    BOUNDS,
    GAP_REGION,
    LOW_HETEROGENEITY,
    SUBSET_COUNTERPARTS,
    crossover_zeta,
    eval_bound,
    get_bound,
    optimality_region,
    table_rows,
)

CONVEX_VALUES = {
    "H": 1.0,
    "B": 1.0,
    "M": 4,
    "K": 25,
    "R": 100,
    "sigma": 10.0,
    "sigma_star": 10.0,
    "zeta_star": 2.0,
    "zeta_bar": 2.0,
}
STRONGLY_CONVEX_VALUES = {**CONVEX_VALUES, "lam": 0.1, "Delta": 3.0}


def test_minibatch_hand_values():
    # H B^2 / R + sigma_star B / sqrt(M K R) = 0.01 + 10 / 100
    assert eval_bound("mbsgd_convex", CONVEX_VALUES) == pytest.approx(0.11)
    # 4 H B^2 / R + 3 sigma_star B / sqrt(M K R)
    assert eval_bound("mbsgd_convex_explicit", CONVEX_VALUES) == pytest.approx(0.34)
    expected = 1.0 * 3.0 / 0.1 * math.exp(-10.0) + 100.0 / (0.1 * 4 * 25 * 100)
    assert eval_bound("mbsgd_sc", STRONGLY_CONVEX_VALUES) == pytest.approx(expected)


def test_accelerated_and_dzr_hand_values():
    assert eval_bound("accel_mbsgd_convex", CONVEX_VALUES) == pytest.approx(1e-4 + 0.1)
    # min{H B^2/R^2, zeta^2/(H R^2)} + sigma B/sqrt(MKR)
    assert eval_bound("dzr_lb_convex", CONVEX_VALUES) == pytest.approx(1e-4 + 0.1)


def test_local_bounds_grow_with_heterogeneity():
    low = eval_bound("local_ub_convex", {**CONVEX_VALUES, "zeta_bar": 0.1})
    high = eval_bound("local_ub_convex", {**CONVEX_VALUES, "zeta_bar": 10.0})
    assert high > low
    # the lower bound's heterogeneity term saturates at H B^2 / R
    saturated = eval_bound("local_lb_convex", {**CONVEX_VALUES, "zeta_star": 1e6})
    assert saturated == pytest.approx(eval_bound("local_lb_convex", {**CONVEX_VALUES, "zeta_star": 1e7}))


def test_unbounded_zeta_bar_gives_infinite_bound():
    assert math.isinf(eval_bound("local_ub_convex", {**CONVEX_VALUES, "zeta_bar": math.inf}))


def test_subset_rows_reduce_at_full_participation():
    for subset_name, full_name in SUBSET_COUNTERPARTS.items():
        values = dict(STRONGLY_CONVEX_VALUES)
        assert eval_bound(subset_name, values) == pytest.approx(eval_bound(full_name, values))
        assert eval_bound(subset_name, {**values, "S": values["M"]}) == pytest.approx(
            eval_bound(full_name, values)
        )


def test_subset_rows_penalise_sampling():
    values = {**STRONGLY_CONVEX_VALUES, "M": 50}
    full = eval_bound("subset_mbsgd_convex", values)
    assert eval_bound("subset_mbsgd_convex", {**values, "S": 10}) > full
    with pytest.raises(ParameterRangeError) as ex:
        eval_bound("subset_mbsgd_convex", {**values, "S": 60})
    assert "S (60.0) exceeds M (50.0)" in str(ex.value)


def test_inner_outer_is_the_better_of_both():
    values = dict(STRONGLY_CONVEX_VALUES)
    assert eval_bound("inner_outer_min", values) == min(
        eval_bound("mbsgd_convex", values), eval_bound("local_ub_convex", values)
    )
    assert eval_bound("inner_outer_min_sc", values) == min(
        eval_bound("mbsgd_sc", values), eval_bound("local_ub_sc", values)
    )


def test_missing_and_invalid_parameters():
    with pytest.raises(MissingParameterError) as ex:
        eval_bound("mbsgd_convex", {"H": 1.0, "M": 2, "K": 1, "R": 1, "B": 1.0})
    assert ex.value.name == "sigma_star"
    assert str(ex.value) == "Missing parameter 'sigma_star' for bound 'mbsgd_convex'"

    with pytest.raises(ParameterRangeError) as ex:
        eval_bound("mbsgd_convex", {**CONVEX_VALUES, "R": 0})
    assert "R must be positive" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        eval_bound("mbsgd_sc", {**STRONGLY_CONVEX_VALUES, "lam": 0.0})
    assert "needs lam > 0" in str(ex.value)

    with pytest.raises(ParameterRangeError) as ex:
        get_bound("fastest")
    assert "unknown bound 'fastest'" in str(ex.value)


def test_aliases_and_symbolic_constant():
    values = dict(STRONGLY_CONVEX_VALUES)
    values["lambda"] = values.pop("lam")
    values["delta"] = values.pop("Delta")
    assert eval_bound("mbsgd_sc", values) == eval_bound("mbsgd_sc", STRONGLY_CONVEX_VALUES)
    # unit-constant rows ignore c
    assert eval_bound("mbsgd_convex", CONVEX_VALUES, c=5.0) == eval_bound("mbsgd_convex", CONVEX_VALUES)


def test_crossover_and_regions():
    assert crossover_zeta(1.0, 1.0, 100) == pytest.approx(0.01)
    params = {"H": 1.0, "B": 1.0, "R": 100}
    assert optimality_region("convex", {**params, "zeta_star": 2.0}) == ACCELERATED_MB_OPTIMAL
    assert optimality_region("convex", {**params, "zeta_star": 0.5}) == GAP_REGION
    assert optimality_region("convex", {**params, "zeta_star": 0.01}) == LOW_HETEROGENEITY
    strongly = {"H": 1.0, "lam": 0.01, "R": 100}
    # edge H^1.5 / sqrt(lam) = 10 on zeta_star^2
    assert optimality_region("strongly_convex", {**strongly, "zeta_star": 4.0}) == ACCELERATED_MB_OPTIMAL
    assert optimality_region("strongly_convex", {**strongly, "zeta_star": 1.0}) == GAP_REGION
    assert optimality_region("strongly_convex", {**strongly, "zeta_star": 0.1}) == LOW_HETEROGENEITY
    with pytest.raises(MissingParameterError):
        optimality_region("convex", {"H": 1.0, "R": 10, "zeta_star": 1.0})
    with pytest.raises(ParameterRangeError) as ex:
        optimality_region("nonconvex", {**params, "zeta_star": 1.0})
    assert "unknown case 'nonconvex'" in str(ex.value)


def test_table_rows():
    rows = table_rows(CONVEX_VALUES)
    names = {row["bound"] for row in rows}
    assert "mbsgd_convex" in names
    assert all(row["case"] == "convex" for row in rows)
    assert not any(name.endswith("_sc") for name in names)

    full = table_rows(STRONGLY_CONVEX_VALUES, ("1", "2", "eq", "explicit"))
    assert {row["table"] for row in full} == {"1", "2", "eq", "explicit"}
    assert all(set(row) == {"table", "bound", "method", "case", "expression", "value"} for row in full)
    assert len(full) <= len(BOUNDS)


UNIT_VALUES = {
    "H": 1.0, "B": 1.0, "M": 1, "S": 1, "K": 1, "R": 1, "sigma": 1.0, "sigma_star": 1.0,
    "zeta_star": 1.0, "zeta_bar": 1.0, "lam": 1.0, "Delta": 1.0,
}
FIRST_VALUES = {
    "H": 2.0, "B": 1.5, "M": 8, "S": 5, "K": 4, "R": 9, "sigma": 3.0, "sigma_star": 2.0,
    "zeta_star": 0.5, "zeta_bar": 1.5, "lam": 0.2, "Delta": 0.7,
}
SECOND_VALUES = {
    "H": 5.0, "B": 0.3, "M": 3, "S": 2, "K": 16, "R": 27, "sigma": 0.4, "sigma_star": 0.25,
    "zeta_star": 6.0, "zeta_bar": 7.0, "lam": 1.5, "Delta": 2.0,
}
HAND_VALUES = {
    "koloskova_convex": (4.0, 1.49175695777036, 0.150751478199102),
    # 1 + sqrt(2) + 2^(1/3) at the unit point
    "khaled_convex": (3.67413461226797, 1.49212019703329, 0.192775025556199),
    "scaffold_convex": (4.0, 0.928343096965845, 0.440749149571305),
    "local_ub_convex": (4.0, 1.61214739240109, 0.150974352385103),
    "local_lb_convex": (3.0, 0.992886211530502, 0.0232623897009741),
    "fedavg_convex": (3.0, 1.21885577878683, 0.288162610798102),
    "koloskova_sc": (3.0, 0.841049382716049, 0.109783426688005),
    "scaffold_sc": (1.73575888234288, 0.730529644383596, 0.00377334044578799),
    # 1/2 + 2 ln 2 + 1 at the unit point
    "local_ub_sc": (2.88629436111989, 10.7317333477354, 0.9077988524979),
    "local_lb_sc": (2.36787944117144, 0.657793209876543, 0.000691288000285153),
    "accel_mbsgd_sc": (1.36787944117144, 0.196901284759408, 8.30604228731559e-05),
    "dzr_lb_sc": (1.36787944117144, 0.156975915799275, 8.27185481073179e-05),
    "fedavg_sc": (2.36787944117144, 0.597694001204257, 0.258051951720541),
}


@pytest.mark.parametrize("name", list(HAND_VALUES))
def test_comparison_rows_hand_values(name):
    for values, expected in zip((UNIT_VALUES, FIRST_VALUES, SECOND_VALUES), HAND_VALUES[name]):
        assert eval_bound(name, values) == pytest.approx(expected, rel=1e-12)


def test_homogeneous_limit():
    values = {**FIRST_VALUES, "zeta_star": 0.0, "zeta_bar": 0.0}
    H, B, M, S, K, R = 2.0, 1.5, 8, 5, 4, 9
    sigma, sigma_star, lam = 3.0, 2.0, 0.2
    noise = sigma_star * B / math.sqrt(M * K * R)
    local_noise = (H * sigma**2 * B**4) ** (1 / 3) / (K ** (1 / 3) * R ** (2 / 3))
    assert eval_bound("local_ub_convex", values) == pytest.approx(H * B**2 / (K * R) + local_noise + noise)
    # heterogeneity terms vanish, so sampling S of M only changes the noise terms
    assert eval_bound("fedavg_convex", values) == pytest.approx(H * B**2 / R + sigma * B / math.sqrt(S * K * R))
    assert eval_bound("subset_mbsgd_convex", values) == pytest.approx(
        H * B**2 / R + sigma_star * B / math.sqrt(S * K * R)
    )
    assert eval_bound("koloskova_convex", values) == pytest.approx(
        eval_bound("mbsgd_convex", values) + (H * sigma_star**2 * B**4) ** (1 / 3) / (K ** (1 / 3) * R ** (2 / 3))
    )
    assert eval_bound("local_lb_convex", values) == pytest.approx(
        sigma * B / math.sqrt(M * K * R) + (H * sigma**2 * B**4) ** (1 / 3) / (K ** (2 / 3) * R ** (2 / 3))
    )
    assert eval_bound("dzr_lb_sc", values) == pytest.approx(sigma**2 / (lam * M * K * R))

    # homogeneous and noiseless: Local SGD gains the factor K over Minibatch SGD
    quiet = {**values, "sigma": 0.0, "sigma_star": 0.0}
    assert eval_bound("local_ub_convex", quiet) == pytest.approx(eval_bound("mbsgd_convex", quiet) / K)
    assert eval_bound("inner_outer_min", quiet) == eval_bound("local_ub_convex", quiet)


# the log(H/lam + KR) factor grows with K while heterogeneity or noise is present
K_LOG_ROWS = ("local_ub_sc", "inner_outer_min_sc")


@pytest.mark.parametrize("H, lam", [(1.0, 1.0), (4.0, 0.1), (16.0, 0.5)])
@pytest.mark.parametrize("base", [UNIT_VALUES, FIRST_VALUES, SECOND_VALUES])
def test_rows_do_not_increase_with_rounds_or_local_steps(H, lam, base):
    values = {key: value for key, value in base.items() if key != "S"}
    values.update({"H": H, "lam": lam})
    for name in BOUNDS:
        for K, R in product((1, 3, 10), (1, 5, 20)):
            point = {**values, "K": K, "R": R}
            current = eval_bound(name, point)
            assert eval_bound(name, {**point, "R": 2 * R}) <= current * (1 + 1e-12), (name, K, R)
            if name in K_LOG_ROWS:
                quiet = {**point, "zeta_bar": 0.0, "sigma": 0.0}
                assert eval_bound(name, {**quiet, "K": 2 * K}) <= eval_bound(name, quiet) * (1 + 1e-12)
            else:
                assert eval_bound(name, {**point, "K": 2 * K}) <= current * (1 + 1e-12), (name, K, R)


def test_subset_minibatch_strongly_convex_states_its_first_term():
    spec = get_bound("subset_mbsgd_sc")
    assert spec.expression.startswith("(H Delta/lam) exp(-lam R/H)")
    assert "not lam B^2 exp(-lam R/H)" in spec.expression
    values = {**FIRST_VALUES, "S": FIRST_VALUES["M"]}
    assert eval_bound("subset_mbsgd_sc", values) == pytest.approx(eval_bound("mbsgd_sc", values))
