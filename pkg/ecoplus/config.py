"""Run configuration: one TOML file, validated section by section."""
from __future__ import annotations
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dc import DcOptions
from .errors import ConfigError
from .models import BoundarySpec, CpemParams, KmmkParams, Limits, RoadSpec, Strategy
from .solvers import SolverOptions
from .utils import validate_json

log = logging.getLogger(__name__)

THREADS_ENV = "ECOPLUS_THREADS"


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ModelSection(_Section):
    cpem: CpemParams = CpemParams()
    kmmk: KmmkParams = KmmkParams()


class PwaSection(_Section):
    segments: int = Field(5, ge=1)
    oracle_segments: int = Field(500, ge=1)


class SafetySection(_Section):
    min_gap: float = Field(2.0, gt=0)
    time_gap: float = Field(4.0, ge=0)
    entry_delay: float = Field(2.0, ge=0)
    ego_exit_speed: float = Field(10.0, ge=0)
    leader_entry_speed: float = Field(6.0, gt=0)
    leader_stop_time: float = Field(10.5, gt=0)
    leader_hold: float = Field(0.5, ge=0)
    leader_exit_time: float = Field(21.0, gt=0)
    leader_exit_speed: float = Field(8.0, ge=0)
    # chosen so the restart covers the stopping point plus the hold, not a published value
    leader_exit_position: float = Field(105.0, gt=0, description="leader position at leader_exit_time [m]")

    @model_validator(mode="after")
    def _ordering(self):
        if self.leader_stop_time + self.leader_hold >= self.leader_exit_time:
            raise ValueError("leader must leave its stop before leader_exit_time")
        return self


class ComfortSection(_Section):
    j_min: float = Field(-1.0, lt=0)
    j_max: float = Field(1.0, gt=0)
    a_min: float = Field(-1.25, lt=0)
    a_max: float = Field(1.25, gt=0)
    vd: float = Field(8.0, ge=0)


class ExperimentConfig(_Section):
    family: Literal["single", "leading", "comfort"] = "single"
    model: Literal["cpem", "kmmk"] = "cpem"
    strategies: List[str] = ["ecoplus", "vm", "jm", "am", "dc"]
    vd: List[float] = [6.0, 8.0, 10.0]
    dt: float = Field(0.1, gt=0)
    tm_min: Optional[float] = Field(None, gt=0, description="unset: smallest feasible tm on the grid")
    tm_max: float = Field(30.0, gt=0)
    tm_step: float = Field(0.1, gt=0)
    seed: int = 0

    @field_validator("strategies")
    @classmethod
    def _known_strategies(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one strategy is required")
        return [Strategy.parse(s).label for s in value]

    @field_validator("vd")
    @classmethod
    def _non_empty(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one terminal velocity is required")
        return value

    @model_validator(mode="after")
    def _range(self):
        if self.tm_min is not None and self.tm_min > self.tm_max:
            raise ValueError("tm_min exceeds tm_max")
        return self

    @property
    def parsed_strategies(self) -> List[Strategy]:
        return [Strategy.parse(s) for s in self.strategies]


class ConfigFile(_Section):
    road: RoadSpec = RoadSpec()
    boundary: BoundarySpec = BoundarySpec()
    limits: Limits = Limits()
    model: ModelSection = ModelSection()
    pwa: PwaSection = PwaSection()
    safety: SafetySection = SafetySection()
    experiment: ExperimentConfig = ExperimentConfig()
    comfort: ComfortSection = ComfortSection()
    dc: DcOptions = DcOptions()
    solver: SolverOptions = SolverOptions()

    @model_validator(mode="after")
    def _speeds(self):
        for vd in self.experiment.vd:
            if vd > self.limits.v_max:
                raise ValueError(f"terminal velocity {vd} exceeds v_max")
        if self.boundary.v0 > self.limits.v_max:
            raise ValueError("initial velocity exceeds v_max")
        return self

    @property
    def vehicle(self) -> CpemParams | KmmkParams:
        return self.model.cpem if self.experiment.model == "cpem" else self.model.kmmk


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        parts.append(f"{loc or '<root>'}: {err.get('msg')}")
    return "; ".join(parts)


def parse_config(data: Dict[str, Any]) -> ConfigFile:
    try:
        return ConfigFile.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_describe(exc)}") from exc


def load_config(path: Optional[Path] = None) -> ConfigFile:
    """Defaults when ``path`` is None; otherwise the TOML file at ``path``."""
    if path is None:
        return ConfigFile()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    log.debug("loaded config from %s", path)
    return parse_config(data)


def apply_overrides(cfg: ConfigFile, overrides: Dict[str, Any]) -> ConfigFile:
    """Dotted keys ("experiment.tm_max") replace values; None entries are skipped."""
    data = cfg.model_dump()
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            if key not in node or not isinstance(node[key], dict):
                raise ConfigError(f"unknown configuration section '{dotted}'")
            node = node[key]
        if leaf not in node:
            raise ConfigError(f"unknown configuration key '{dotted}'")
        node[leaf] = value
    return parse_config(data)


def effective_config(cfg: ConfigFile) -> Dict[str, Any]:
    data = cfg.model_dump(mode="json")
    validate_json(data, "config.schema.json")
    return data


def sweep_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    cpus = os.cpu_count() or 1
    if not raw:
        return cpus
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    return n
