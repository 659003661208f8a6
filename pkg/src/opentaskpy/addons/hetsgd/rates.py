"""Closed-form guarantees and lower bounds for distributed SGD variants.

Every row is evaluated with unit constants unless it states explicit ones.
Parameter names: H, B, Delta, lam, sigma, sigma_star, zeta_star, zeta_bar,
M, K, R and S (S defaults to M where a row accepts it). ``zeta_star`` and
``zeta_bar`` are the unsquared heterogeneity levels.
"""

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Any

from .exceptions import MissingParameterError, ParameterRangeError

CONVEX = "convex"
STRONGLY_CONVEX = "strongly_convex"

UNIT_C = "unit_c"
SYMBOLIC_C = "symbolic_c"

BOUND_TABLES = ("1", "2", "eq", "explicit")

ACCELERATED_MB_OPTIMAL = "accelerated_mb_optimal"
GAP_REGION = "gap_region"
LOW_HETEROGENEITY = "low_heterogeneity"

_ALIASES = {"lambda": "lam", "delta": "Delta"}
_POSITIVE = ("H", "M", "K", "R", "S")

Values = Mapping[str, float]


@dataclass(frozen=True)
class BoundSpec:
    """One row of a rate table.

    ``params`` lists what the row needs; ``optional`` maps optional
    parameters to the parameter they default to.
    """

    name: str
    case: str
    table: str
    params: tuple[str, ...]
    formula: Callable[[dict[str, float]], float]
    expression: str
    label: str = ""
    optional: dict[str, str] = field(default_factory=dict)
    constant_mode: str = UNIT_C


def _sqrt(value: float) -> float:
    return math.sqrt(value)


def _cbrt(value: float) -> float:
    return value ** (1 / 3)


def _mbsgd_convex(p: dict[str, float]) -> float:
    return p["H"] * p["B"] ** 2 / p["R"] + p["sigma_star"] * p["B"] / _sqrt(p["M"] * p["K"] * p["R"])


def _accel_mbsgd_convex(p: dict[str, float]) -> float:
    return p["H"] * p["B"] ** 2 / p["R"] ** 2 + p["sigma"] * p["B"] / _sqrt(p["M"] * p["K"] * p["R"])


def _koloskova_convex(p: dict[str, float]) -> float:
    H, B, K, R = p["H"], p["B"], p["K"], p["R"]
    return (
        _mbsgd_convex(p)
        + _cbrt(H * p["zeta_star"] ** 2 * B**4) / R ** (2 / 3)
        + _cbrt(H * p["sigma_star"] ** 2 * B**4) / (K ** (1 / 3) * R ** (2 / 3))
    )


def _khaled_convex(p: dict[str, float]) -> float:
    H, B, R = p["H"], p["B"], p["R"]
    spread = p["sigma_star"] ** 2 + p["zeta_star"] ** 2
    return (
        H * B**2 / R
        + B * _sqrt(spread) / _sqrt(p["M"] * p["K"] * R)
        + _cbrt(H * spread * B**4) / R ** (2 / 3)
    )


def _scaffold_convex(p: dict[str, float]) -> float:
    H, B, M, S, K, R = p["H"], p["B"], p["M"], p["S"], p["K"], p["R"]
    return (
        H * B**2 / R
        + p["sigma"] * B / _sqrt(S * K * R)
        + M * p["zeta_star"] ** 2 / (H * S * R)
        + p["sigma"] * p["zeta_star"] * _sqrt(M) / (H * S * _sqrt(K * R))
    )


def _local_ub_convex(p: dict[str, float]) -> float:
    H, B, K, R = p["H"], p["B"], p["K"], p["R"]
    return (
        H * B**2 / (K * R)
        + _cbrt(H * p["zeta_bar"] ** 2 * B**4) / R ** (2 / 3)
        + _cbrt(H * p["sigma"] ** 2 * B**4) / (K ** (1 / 3) * R ** (2 / 3))
        + p["sigma_star"] * B / _sqrt(p["M"] * K * R)
    )


def _local_lb_convex(p: dict[str, float]) -> float:
    H, B, K, R = p["H"], p["B"], p["K"], p["R"]
    return (
        min(H * B**2 / R, _cbrt(H * p["zeta_star"] ** 2 * B**4) / R ** (2 / 3))
        + p["sigma"] * B / _sqrt(p["M"] * K * R)
        + _cbrt(H * p["sigma"] ** 2 * B**4) / (K ** (2 / 3) * R ** (2 / 3))
    )


def _dzr_lb_convex(p: dict[str, float]) -> float:
    H, B, R = p["H"], p["B"], p["R"]
    return (
        min(H * B**2 / R**2, p["zeta_star"] ** 2 / (H * R**2))
        + p["sigma"] * B / _sqrt(p["M"] * p["K"] * R)
    )


def _mbsgd_sc(p: dict[str, float]) -> float:
    H, lam, R = p["H"], p["lam"], p["R"]
    return H * p["Delta"] / lam * math.exp(-lam * R / H) + p["sigma_star"] ** 2 / (
        lam * p["M"] * p["K"] * R
    )


def _accel_mbsgd_sc(p: dict[str, float]) -> float:
    H, lam, R = p["H"], p["lam"], p["R"]
    return p["Delta"] * math.exp(-_sqrt(lam) * R / _sqrt(H)) + p["sigma"] ** 2 / (
        lam * p["M"] * p["K"] * R
    )


def _koloskova_sc(p: dict[str, float]) -> float:
    H, lam, K, R = p["H"], p["lam"], p["K"], p["R"]
    return (
        p["sigma_star"] ** 2 / (lam * p["M"] * K * R)
        + H * p["zeta_star"] ** 2 / (lam**2 * R**2)
        + H * p["sigma_star"] ** 2 / (lam**2 * K * R**2)
    )


def _scaffold_sc(p: dict[str, float]) -> float:
    H, lam, R = p["H"], p["lam"], p["R"]
    return (H * p["Delta"] + lam * p["zeta_star"] ** 2 / H**2) * math.exp(-lam * R / H) + p[
        "sigma"
    ] ** 2 / (lam * p["M"] * p["K"] * R)


def _scaffold_subset_sc(p: dict[str, float]) -> float:
    H, lam, M, S, K, R = p["H"], p["lam"], p["M"], p["S"], p["K"], p["R"]
    rate = min(lam / H, S / M)
    return (H * p["Delta"] + lam * M * p["zeta_star"] ** 2 / (S * H**2)) * math.exp(
        -rate * R
    ) + p["sigma"] ** 2 / (lam * S * K * R)


def _local_ub_sc(p: dict[str, float]) -> float:
    H, lam, K, R = p["H"], p["lam"], p["K"], p["R"]
    return (
        H**2 * p["B"] ** 2 / (H * K * R + lam * K**2 * R**2)
        + (H * p["zeta_bar"] ** 2 / (lam**2 * R**2) + H * p["sigma"] ** 2 / (lam**2 * K * R**2))
        * math.log(H / lam + K * R)
        + p["sigma_star"] ** 2 / (lam * p["M"] * K * R)
    )


def _local_lb_sc(p: dict[str, float]) -> float:
    H, lam, K, R, Delta = p["H"], p["lam"], p["K"], p["R"], p["Delta"]
    return (
        min(Delta * math.exp(-lam * R / H), H * p["zeta_star"] ** 2 / (lam**2 * R**2))
        + p["sigma"] ** 2 / (lam * p["M"] * K * R)
        + min(Delta, H * p["sigma"] ** 2 / (lam**2 * K**2 * R**2))
    )


def _dzr_lb_sc(p: dict[str, float]) -> float:
    H, lam, R = p["H"], p["lam"], p["R"]
    return min(
        p["Delta"] * _sqrt(lam) / _sqrt(H), lam * p["zeta_star"] ** 2 / H**2
    ) * math.exp(-_sqrt(lam) * R / _sqrt(H)) + p["sigma"] ** 2 / (lam * p["M"] * p["K"] * R)


def _subset_mbsgd_convex(p: dict[str, float]) -> float:
    H, B, M, S, K, R = p["H"], p["B"], p["M"], p["S"], p["K"], p["R"]
    return (
        H * B**2 / R
        + p["sigma_star"] * B / _sqrt(S * K * R)
        + _sqrt(1 - S / M) * p["zeta_star"] * B / _sqrt(S * R)
    )


def _subset_mbsgd_sc(p: dict[str, float]) -> float:
    # first term is mbsgd_sc's, so S = M gives mbsgd_sc exactly
    H, lam, M, S, K, R = p["H"], p["lam"], p["M"], p["S"], p["K"], p["R"]
    return (
        H * p["Delta"] / lam * math.exp(-lam * R / H)
        + p["sigma_star"] ** 2 / (lam * S * K * R)
        + (1 - S / M) * p["zeta_star"] ** 2 / (lam * S * R)
    )


def _fedavg_convex(p: dict[str, float]) -> float:
    H, B, M, S, K, R = p["H"], p["B"], p["M"], p["S"], p["K"], p["R"]
    return (
        H * B**2 / R
        + p["sigma"] * B / _sqrt(S * K * R)
        + _cbrt(H * p["zeta_star"] ** 2 * B**4) / R ** (2 / 3)
        + _sqrt(1 - S / M) * p["zeta_star"] * B / _sqrt(S * R)
    )


def _fedavg_sc(p: dict[str, float]) -> float:
    H, lam, M, S, K, R = p["H"], p["lam"], p["M"], p["S"], p["K"], p["R"]
    return (
        lam * p["B"] ** 2 * math.exp(-lam * R / H)
        + p["sigma"] ** 2 / (lam * S * K * R)
        + H * p["zeta_star"] ** 2 / (lam**2 * R**2)
        + (1 - S / M) * p["zeta_star"] ** 2 / (lam * S * R)
    )


def _inner_outer_min(p: dict[str, float]) -> float:
    return min(_mbsgd_convex(p), _local_ub_convex(p))


def _inner_outer_min_sc(p: dict[str, float]) -> float:
    return min(_mbsgd_sc(p), _local_ub_sc(p))


def _mbsgd_convex_explicit(p: dict[str, float]) -> float:
    return 4 * p["H"] * p["B"] ** 2 / p["R"] + 3 * p["sigma_star"] * p["B"] / _sqrt(
        p["M"] * p["K"] * p["R"]
    )


def _mbsgd_sc_explicit(p: dict[str, float]) -> float:
    H, lam, R = p["H"], p["lam"], p["R"]
    return 128 * H * p["B"] ** 2 * math.exp(-lam * R / (8 * H)) + 72 * p[
        "sigma_star"
    ] ** 2 / (lam * p["M"] * p["K"] * R)


def _local_ub_convex_explicit(p: dict[str, float]) -> float:
    H, B, K, R = p["H"], p["B"], p["K"], p["R"]
    return (
        10 * H * B**2 / (K * R)
        + 13 * _cbrt(H * p["zeta_bar"] ** 2 * B**4) / R ** (2 / 3)
        + 7 * _cbrt(H * p["sigma"] ** 2 * B**4) / (K ** (1 / 3) * R ** (2 / 3))
        + 4 * p["sigma_star"] * B / _sqrt(p["M"] * K * R)
    )


_BASE = ("H", "M", "K", "R")
_S_DEFAULT = {"S": "M"}

BOUNDS: dict[str, BoundSpec] = {
    spec.name: spec
    for spec in (
        BoundSpec("mbsgd_convex", CONVEX, "1", (*_BASE, "B", "sigma_star"), _mbsgd_convex,
                  "HB^2/R + sigma_star B/sqrt(MKR)", "Minibatch SGD"),
        BoundSpec("accel_mbsgd_convex", CONVEX, "1", (*_BASE, "B", "sigma"), _accel_mbsgd_convex,
                  "HB^2/R^2 + sigma B/sqrt(MKR)", "Accelerated Minibatch SGD"),
        BoundSpec("koloskova_convex", CONVEX, "1", (*_BASE, "B", "sigma_star", "zeta_star"),
                  _koloskova_convex,
                  "HB^2/R + sigma_star B/sqrt(MKR) + (H zeta_star^2 B^4)^(1/3)/R^(2/3)"
                  " + (H sigma_star^2 B^4)^(1/3)/(K^(1/3) R^(2/3))",
                  "Local SGD (Koloskova et al.)"),
        BoundSpec("khaled_convex", CONVEX, "1", (*_BASE, "B", "sigma_star", "zeta_star"),
                  _khaled_convex,
                  "HB^2/R + B sqrt(sigma_star^2 + zeta_star^2)/sqrt(MKR)"
                  " + (H (sigma_star^2 + zeta_star^2) B^4)^(1/3)/R^(2/3)",
                  "Local SGD (Khaled et al.)"),
        BoundSpec("scaffold_convex", CONVEX, "1", (*_BASE, "B", "sigma", "zeta_star"),
                  _scaffold_convex,
                  "HB^2/R + sigma B/sqrt(SKR) + M zeta_star^2/(HSR)"
                  " + sigma zeta_star sqrt(M)/(HS sqrt(KR))",
                  "SCAFFOLD", dict(_S_DEFAULT)),
        BoundSpec("local_ub_convex", CONVEX, "1", (*_BASE, "B", "sigma", "sigma_star", "zeta_bar"),
                  _local_ub_convex,
                  "HB^2/(KR) + (H zeta_bar^2 B^4)^(1/3)/R^(2/3)"
                  " + (H sigma^2 B^4)^(1/3)/(K^(1/3) R^(2/3)) + sigma_star B/sqrt(MKR)",
                  "Local SGD upper bound"),
        BoundSpec("local_lb_convex", CONVEX, "1", (*_BASE, "B", "sigma", "zeta_star"),
                  _local_lb_convex,
                  "min{HB^2/R, (H zeta_star^2 B^4)^(1/3)/R^(2/3)} + sigma B/sqrt(MKR)"
                  " + (H sigma^2 B^4)^(1/3)/(K^(2/3) R^(2/3))",
                  "Local SGD lower bound"),
        BoundSpec("dzr_lb_convex", CONVEX, "1", (*_BASE, "B", "sigma", "zeta_star"),
                  _dzr_lb_convex,
                  "min{HB^2/R^2, zeta_star^2/(HR^2)} + sigma B/sqrt(MKR)",
                  "Algorithm-independent lower bound"),
        BoundSpec("mbsgd_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "Delta", "sigma_star"),
                  _mbsgd_sc, "(H Delta/lam) exp(-lam R/H) + sigma_star^2/(lam MKR)",
                  "Minibatch SGD"),
        BoundSpec("accel_mbsgd_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "Delta", "sigma"),
                  _accel_mbsgd_sc, "Delta exp(-sqrt(lam) R/sqrt(H)) + sigma^2/(lam MKR)",
                  "Accelerated Minibatch SGD"),
        BoundSpec("koloskova_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "sigma_star", "zeta_star"),
                  _koloskova_sc,
                  "sigma_star^2/(lam MKR) + H zeta_star^2/(lam^2 R^2) + H sigma_star^2/(lam^2 K R^2)",
                  "Local SGD (Koloskova et al.)"),
        BoundSpec("scaffold_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "Delta", "sigma", "zeta_star"),
                  _scaffold_sc,
                  "(H Delta + lam zeta_star^2/H^2) exp(-lam R/H) + sigma^2/(lam MKR)",
                  "SCAFFOLD"),
        BoundSpec("local_ub_sc", STRONGLY_CONVEX, "2",
                  (*_BASE, "lam", "B", "sigma", "sigma_star", "zeta_bar"), _local_ub_sc,
                  "H^2 B^2/(HKR + lam K^2 R^2) + (H zeta_bar^2/(lam^2 R^2)"
                  " + H sigma^2/(lam^2 K R^2)) log(H/lam + KR) + sigma_star^2/(lam MKR)",
                  "Local SGD upper bound"),
        BoundSpec("local_lb_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "Delta", "sigma", "zeta_star"),
                  _local_lb_sc,
                  "min{Delta exp(-lam R/H), H zeta_star^2/(lam^2 R^2)} + sigma^2/(lam MKR)"
                  " + min{Delta, H sigma^2/(lam^2 K^2 R^2)}",
                  "Local SGD lower bound"),
        BoundSpec("dzr_lb_sc", STRONGLY_CONVEX, "2", (*_BASE, "lam", "Delta", "sigma", "zeta_star"),
                  _dzr_lb_sc,
                  "min{Delta sqrt(lam/H), lam zeta_star^2/H^2} exp(-sqrt(lam) R/sqrt(H))"
                  " + sigma^2/(lam MKR)",
                  "Algorithm-independent lower bound"),
        BoundSpec("inner_outer_min", CONVEX, "eq",
                  (*_BASE, "B", "sigma", "sigma_star", "zeta_bar"), _inner_outer_min,
                  "min{mbsgd_convex, local_ub_convex}", "Inner/outer stepsizes"),
        BoundSpec("inner_outer_min_sc", STRONGLY_CONVEX, "eq",
                  (*_BASE, "lam", "B", "Delta", "sigma", "sigma_star", "zeta_bar"),
                  _inner_outer_min_sc, "min{mbsgd_sc, local_ub_sc}", "Inner/outer stepsizes"),
        BoundSpec("subset_mbsgd_convex", CONVEX, "eq", (*_BASE, "B", "sigma_star", "zeta_star"),
                  _subset_mbsgd_convex,
                  "HB^2/R + sigma_star B/sqrt(SKR) + sqrt(1 - S/M) zeta_star B/sqrt(SR)",
                  "Minibatch SGD, S of M machines", dict(_S_DEFAULT)),
        BoundSpec("subset_mbsgd_sc", STRONGLY_CONVEX, "eq",
                  (*_BASE, "lam", "Delta", "sigma_star", "zeta_star"), _subset_mbsgd_sc,
                  "(H Delta/lam) exp(-lam R/H) + sigma_star^2/(lam SKR)"
                  " + (1 - S/M) zeta_star^2/(lam SR)"
                  " [first term taken from mbsgd_sc, not lam B^2 exp(-lam R/H)]",
                  "Minibatch SGD, S of M machines", dict(_S_DEFAULT)),
        BoundSpec("fedavg_convex", CONVEX, "eq", (*_BASE, "B", "sigma", "zeta_star"),
                  _fedavg_convex,
                  "HB^2/R + sigma B/sqrt(SKR) + (H zeta_star^2 B^4)^(1/3)/R^(2/3)"
                  " + sqrt(1 - S/M) zeta_star B/sqrt(SR)",
                  "FedAvg", dict(_S_DEFAULT)),
        BoundSpec("fedavg_sc", STRONGLY_CONVEX, "eq", (*_BASE, "lam", "B", "sigma", "zeta_star"),
                  _fedavg_sc,
                  "lam B^2 exp(-lam R/H) + sigma^2/(lam SKR) + H zeta_star^2/(lam^2 R^2)"
                  " + (1 - S/M) zeta_star^2/(lam SR)",
                  "FedAvg", dict(_S_DEFAULT)),
        BoundSpec("scaffold_subset_sc", STRONGLY_CONVEX, "eq",
                  (*_BASE, "lam", "Delta", "sigma", "zeta_star"), _scaffold_subset_sc,
                  "(H Delta + lam M zeta_star^2/(S H^2)) exp(-min{lam/H, S/M} R)"
                  " + sigma^2/(lam SKR)",
                  "SCAFFOLD, S of M machines", dict(_S_DEFAULT)),
        BoundSpec("mbsgd_convex_explicit", CONVEX, "explicit", (*_BASE, "B", "sigma_star"),
                  _mbsgd_convex_explicit, "4HB^2/R + 3 sigma_star B/sqrt(MKR)",
                  "Minibatch SGD, explicit constants"),
        BoundSpec("mbsgd_sc_explicit", STRONGLY_CONVEX, "explicit",
                  (*_BASE, "lam", "B", "sigma_star"), _mbsgd_sc_explicit,
                  "128 H B^2 exp(-lam R/(8H)) + 72 sigma_star^2/(lam MKR)",
                  "Minibatch SGD, explicit constants"),
        BoundSpec("local_ub_convex_explicit", CONVEX, "explicit",
                  (*_BASE, "B", "sigma", "sigma_star", "zeta_bar"), _local_ub_convex_explicit,
                  "10HB^2/(KR) + 13 (H zeta_bar^2 B^4)^(1/3)/R^(2/3)"
                  " + 7 (H sigma^2 B^4)^(1/3)/(K^(1/3) R^(2/3)) + 4 sigma_star B/sqrt(MKR)",
                  "Local SGD, explicit constants"),
    )
}

# Subset rows and the full-participation row they reduce to at S = M
SUBSET_COUNTERPARTS = {
    "subset_mbsgd_convex": "mbsgd_convex",
    "subset_mbsgd_sc": "mbsgd_sc",
    "scaffold_subset_sc": "scaffold_sc",
}


def get_bound(name: str) -> BoundSpec:
    """Look a row up by name."""
    try:
        return BOUNDS[name]
    except KeyError:
        raise ParameterRangeError(
            f"unknown bound '{name}', expected one of {sorted(BOUNDS)}"
        ) from None


def _normalise(values: Mapping[str, Any]) -> dict[str, float]:
    normalised: dict[str, float] = {}
    for key, value in values.items():
        if value is None:
            continue
        normalised[_ALIASES.get(key, key)] = float(value)
    return normalised


def eval_bound(spec: BoundSpec | str, values: Mapping[str, Any], c: float = 1.0) -> float:
    """Evaluate a row at the given parameters.

    Args:
        spec: The row or its name
        values: Parameter values; extra keys are ignored
        c: Leading constant, used only for ``symbolic_c`` rows

    Returns:
        float: The row's value (``inf`` when an unbounded zeta_bar enters it)

    Raises:
        MissingParameterError: A needed parameter is absent
        ParameterRangeError: A parameter is out of range
    """
    if isinstance(spec, str):
        spec = get_bound(spec)
    supplied = _normalise(values)
    params: dict[str, float] = {}
    for name in spec.params:
        if name not in supplied:
            raise MissingParameterError(name, spec.name)
        params[name] = supplied[name]
    for name, fallback in spec.optional.items():
        params[name] = supplied.get(name, params[fallback])
    for name, value in params.items():
        if name in _POSITIVE:
            if not value > 0:
                raise ParameterRangeError(f"{name} must be positive for '{spec.name}', got {value}")
        elif value < 0:
            raise ParameterRangeError(f"{name} must be non-negative for '{spec.name}', got {value}")
    if "S" in params and params["S"] > params["M"]:
        raise ParameterRangeError(f"S ({params['S']}) exceeds M ({params['M']}) for '{spec.name}'")
    if spec.case == STRONGLY_CONVEX and not params["lam"] > 0:
        raise ParameterRangeError(f"'{spec.name}' is a strongly convex bound and needs lam > 0")
    value = spec.formula(params)
    if spec.constant_mode == SYMBOLIC_C:
        value *= c
    return value


def crossover_zeta(H: float, B: float, R: float) -> float:
    """Heterogeneity zeta_star^2 = H^2 B^2 / R where the Local SGD floor meets HB^2/R."""
    return H**2 * B**2 / R


def optimality_region(case: str, params: Mapping[str, Any]) -> str:
    """Classify the heterogeneity level against the accelerated Minibatch SGD optimality edge.

    Args:
        case: ``convex`` or ``strongly_convex``
        params: Needs H, R, zeta_star and B (convex) or lam (strongly convex)

    Returns:
        str: ``accelerated_mb_optimal``, ``gap_region`` or ``low_heterogeneity``
    """
    values = _normalise(params)
    for name in ("H", "R", "zeta_star"):
        if name not in values:
            raise MissingParameterError(name, f"optimality_region({case})")
    H, R, zeta = values["H"], values["R"], values["zeta_star"]
    if case == CONVEX:
        if "B" not in values:
            raise MissingParameterError("B", f"optimality_region({case})")
        edge = H * values["B"]
        measure = zeta
        lower = edge / math.sqrt(R)
    elif case == STRONGLY_CONVEX:
        if "lam" not in values:
            raise MissingParameterError("lam", f"optimality_region({case})")
        if not values["lam"] > 0:
            raise ParameterRangeError("strongly convex optimality region needs lam > 0")
        edge = H**1.5 / math.sqrt(values["lam"])
        measure = zeta**2
        lower = edge / R
    else:
        raise ParameterRangeError(f"unknown case '{case}', expected convex or strongly_convex")
    if measure >= edge:
        return ACCELERATED_MB_OPTIMAL
    if measure < lower:
        return LOW_HETEROGENEITY
    return GAP_REGION


def table_rows(values: Mapping[str, Any], tables: tuple[str, ...] = ("1", "2")) -> list[dict[str, Any]]:
    """Evaluate every row of the given tables, skipping rows whose parameters are missing.

    Strongly convex rows are skipped when lam is zero.
    """
    supplied = _normalise(values)
    rows: list[dict[str, Any]] = []
    for spec in BOUNDS.values():
        if spec.table not in tables:
            continue
        if spec.case == STRONGLY_CONVEX and not supplied.get("lam", 0) > 0:
            continue
        try:
            value = eval_bound(spec, supplied)
        except MissingParameterError:
            continue
        rows.append(
            {
                "table": spec.table,
                "bound": spec.name,
                "method": spec.label,
                "case": spec.case,
                "expression": spec.expression,
                "value": value,
            }
        )
    return rows
