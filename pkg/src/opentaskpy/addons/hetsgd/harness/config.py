"""Experiment configuration: schema validation, defaults and the parsed form.

Configs are JSON documents validated against the packaged schemas under
``schemas/`` and then checked semantically. ``parse_config`` fills every
default in, so ``parse_config(serialize_config(config)) == config``.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cache
from importlib.resources import files
from pathlib import Path
from typing import Any

import opentaskpy.otflogging
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from opentaskpy.exceptions import InvalidConfigError
from referencing import Registry, Resource

from ..optimizers import schedules

logger = opentaskpy.otflogging.init_logging(__name__)

SCHEMA_VERSION = 1
DEFAULT_TOLERANCE_FACTOR = 1e-6

FAMILIES = ("local_lb", "chain", "quadratic", "logistic")
ALGORITHMS = ("minibatch", "local", "inner_outer", "acsa", "multistage_acsa")

DEFAULT_MACHINES = {"local_lb": 2, "chain": 2, "quadratic": 4, "logistic": 25}

_SCHEMA_FILES = (
    ("experiment.json",),
    ("experiment", "instance.json"),
    ("experiment", "algorithm.json"),
    ("experiment", "geometry.json"),
    ("experiment", "stepsizes.json"),
)
_ROOT_SCHEMA = "http://localhost/experiment.json"

_ALLOWED_SCHEDULES = {
    "minibatch": (schedules.CONSTANT, schedules.STICH, schedules.THEOREM1_CONVEX),
    "local": (
        schedules.CONSTANT,
        schedules.THEOREM2_CONVEX,
        schedules.THEOREM2_STRONGLY_CONVEX,
    ),
}


@dataclass(frozen=True)
class StepsizeGrid:
    """Either explicit ``values`` or ``num`` points of base**linspace(start, stop)."""

    values: tuple[float, ...] | None = None
    start: float | None = None
    stop: float | None = None
    num: int | None = None
    base: str | float = "e"

    @classmethod
    def logspace(cls, start: float, stop: float, num: int, base: str | float = "e") -> "StepsizeGrid":
        """Log-spaced grid."""
        return cls(None, float(start), float(stop), int(num), base)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "StepsizeGrid":
        """Build from the JSON form."""
        if "values" in values:
            return cls(tuple(float(value) for value in values["values"]))
        return cls.logspace(values["start"], values["stop"], values["num"], values.get("base", "e"))

    def to_dict(self) -> dict[str, Any]:
        """JSON form."""
        if self.values is not None:
            return {"values": list(self.values)}
        return {
            "kind": "logspace",
            "base": self.base,
            "start": self.start,
            "stop": self.stop,
            "num": self.num,
        }

    def points(self) -> list[float]:
        """Grid points in ascending order without duplicates."""
        if self.values is not None:
            return sorted(set(self.values))
        assert self.start is not None and self.stop is not None and self.num is not None
        base = math.e if self.base == "e" else float(self.base)
        if self.num == 1:
            return [base**self.start]
        step = (self.stop - self.start) / (self.num - 1)
        return sorted({base ** (self.start + index * step) for index in range(self.num)})


# log-scale grids of 10 points: e^-6..e^0 for Minibatch SGD, e^-8..e^-1 for Local SGD
MINIBATCH_GRID = StepsizeGrid.logspace(-6, 0, 10)
LOCAL_GRID = StepsizeGrid.logspace(-8, -1, 10)


@dataclass(frozen=True)
class AlgorithmConfig:
    """One algorithm block with its defaults applied."""

    algo: str
    label: str
    schedule: str | None = None
    stepsizes: StepsizeGrid | None = None
    eta_inner: StepsizeGrid | None = None
    eta_outer: StepsizeGrid | None = None
    averaging: str = "weighted"
    regularize: bool = False
    Delta: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """JSON form, leaving out unset optional fields."""
        block: dict[str, Any] = {"algo": self.algo, "label": self.label}
        if self.schedule is not None:
            block["schedule"] = self.schedule
        for name in ("stepsizes", "eta_inner", "eta_outer"):
            grid = getattr(self, name)
            if grid is not None:
                block[name] = grid.to_dict()
        if self.algo in ("minibatch", "local", "inner_outer"):
            block["averaging"] = self.averaging
        if self.algo == "acsa":
            block["regularize"] = self.regularize
        if self.Delta is not None:
            block["Delta"] = self.Delta
        return block


@dataclass(frozen=True)
class GeometryGrid:
    """Lists of M, K, R and S; every combination is one geometry."""

    M: tuple[int, ...]
    K: tuple[int, ...]
    R: tuple[int, ...]
    S: tuple[int | None, ...] = (None,)

    def to_dict(self) -> dict[str, Any]:
        """JSON form."""
        return {"M": list(self.M), "K": list(self.K), "R": list(self.R), "S": list(self.S)}


@dataclass
class ExperimentConfig:
    """A parsed, validated experiment."""

    master_seed: int
    instance: dict[str, Any]
    algorithms: list[AlgorithmConfig]
    geometry: GeometryGrid
    name: str = "experiment"
    replicates: int = 1
    tolerance_factor: float = DEFAULT_TOLERANCE_FACTOR
    threads: int = 1
    output: dict[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def family(self) -> str:
        """Instance family name."""
        return str(self.instance["family"])


@cache
def _registry() -> Registry:
    root = files("opentaskpy.addons.hetsgd") / "schemas"
    resources = []
    for parts in _SCHEMA_FILES:
        node = root
        for part in parts:
            node = node / part
        contents = json.loads(node.read_text(encoding="utf-8"))
        resources.append((contents["$id"], Resource.from_contents(contents)))
    return Registry().with_resources(resources)


def _validator() -> Draft202012Validator:
    registry = _registry()
    schema = registry.contents(_ROOT_SCHEMA)
    return Draft202012Validator(schema, registry=registry)


def validate_config_json(document: dict[str, Any]) -> None:
    """Validate a raw config against the packaged schema.

    Raises:
        InvalidConfigError: The document does not match the schema
    """
    error = best_match(_validator().iter_errors(document))
    if error is not None:
        location = "/".join(str(part) for part in error.absolute_path) or "<root>"
        raise InvalidConfigError(f"Experiment config is invalid at {location}: {error.message}")


def _grid(block: dict[str, Any], name: str) -> StepsizeGrid | None:
    return StepsizeGrid.from_dict(block[name]) if name in block else None


def _parse_algorithm(block: dict[str, Any], family: str) -> AlgorithmConfig:
    algo = block["algo"]
    label = block.get("label", algo)
    schedule = block.get("schedule")
    stepsizes = _grid(block, "stepsizes")

    if algo in _ALLOWED_SCHEDULES:
        schedule = schedule or schedules.CONSTANT
        if schedule not in _ALLOWED_SCHEDULES[algo]:
            raise InvalidConfigError(f"Schedule '{schedule}' is not available for '{algo}'")
        if schedule == schedules.CONSTANT:
            if stepsizes is None:
                stepsizes = MINIBATCH_GRID if algo == "minibatch" else LOCAL_GRID
        elif stepsizes is not None:
            raise InvalidConfigError(
                f"'{label}': schedule '{schedule}' sets its own stepsizes, drop 'stepsizes'"
            )
    elif schedule is not None or stepsizes is not None:
        raise InvalidConfigError(f"'{label}': '{algo}' takes no schedule or stepsizes")

    eta_inner = _grid(block, "eta_inner")
    eta_outer = _grid(block, "eta_outer")
    if algo == "inner_outer":
        eta_inner = eta_inner or LOCAL_GRID
        eta_outer = eta_outer or LOCAL_GRID
    elif eta_inner is not None or eta_outer is not None:
        raise InvalidConfigError(f"'{label}': only inner_outer takes eta_inner/eta_outer")

    if "regularize" in block and algo != "acsa":
        raise InvalidConfigError(f"'{label}': only acsa takes 'regularize'")
    if "Delta" in block and algo != "multistage_acsa":
        raise InvalidConfigError(f"'{label}': only multistage_acsa takes 'Delta'")
    if "averaging" in block and algo in ("acsa", "multistage_acsa"):
        raise InvalidConfigError(f"'{label}': AC-SA always returns its aggregated iterate")
    if algo == "multistage_acsa" and family == "logistic" and "Delta" not in block:
        logger.debug(f"'{label}' will take Delta from the logistic instance's F(0) - F*")

    return AlgorithmConfig(
        algo=algo,
        label=label,
        schedule=schedule,
        stepsizes=stepsizes,
        eta_inner=eta_inner,
        eta_outer=eta_outer,
        averaging=block.get("averaging", "weighted"),
        regularize=bool(block.get("regularize", False)),
        Delta=None if "Delta" not in block else float(block["Delta"]),
    )


def _parse_geometry(block: dict[str, Any], family: str) -> GeometryGrid:
    machines = tuple(block.get("M", [DEFAULT_MACHINES[family]]))
    if family in ("local_lb", "chain") and min(machines) < 2:
        raise InvalidConfigError(f"'{family}' needs at least 2 machines")
    participants = tuple(block.get("S", [None]))
    for S in participants:
        if S is not None and S > min(machines):
            raise InvalidConfigError(f"S={S} exceeds the smallest M in the grid ({min(machines)})")
    if family == "chain" and 0 in block["R"]:
        raise InvalidConfigError("the chain instance is sized for R >= 1")
    return GeometryGrid(machines, tuple(block["K"]), tuple(block["R"]), participants)


def parse_config(document: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw config and return it with every default applied.

    Args:
        document: The decoded JSON document

    Returns:
        ExperimentConfig: The parsed experiment

    Raises:
        InvalidConfigError: Schema or semantic problem
    """
    validate_config_json(document)
    instance = dict(document["instance"])
    family = instance["family"]
    labels = [block.get("label", block["algo"]) for block in document["algorithms"]]
    if len(set(labels)) != len(labels):
        raise InvalidConfigError(f"Algorithm labels must be unique, got {labels}")
    return ExperimentConfig(
        schema_version=document["schema_version"],
        name=document.get("name", "experiment"),
        master_seed=document["master_seed"],
        replicates=document.get("replicates", 1),
        instance=instance,
        algorithms=[_parse_algorithm(block, family) for block in document["algorithms"]],
        geometry=_parse_geometry(document["geometry"], family),
        tolerance_factor=document.get("tolerance_factor", DEFAULT_TOLERANCE_FACTOR),
        threads=document.get("threads", 1),
        output=dict(document.get("output", {})),
    )


def serialize_config(config: ExperimentConfig) -> dict[str, Any]:
    """Return the JSON form of a parsed config."""
    document: dict[str, Any] = {
        "schema_version": config.schema_version,
        "name": config.name,
        "master_seed": config.master_seed,
        "replicates": config.replicates,
        "instance": dict(config.instance),
        "algorithms": [algorithm.to_dict() for algorithm in config.algorithms],
        "geometry": config.geometry.to_dict(),
        "tolerance_factor": config.tolerance_factor,
        "threads": config.threads,
    }
    if config.output:
        document["output"] = dict(config.output)
    return document


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and parse a config file.

    Raises:
        InvalidConfigError: Unreadable JSON or an invalid config
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as ex:
        raise InvalidConfigError(f"Experiment config {path} cannot be read: {ex}") from ex
    except json.JSONDecodeError as ex:
        raise InvalidConfigError(f"Experiment config {path} is not valid JSON: {ex}") from ex
    return parse_config(document)
