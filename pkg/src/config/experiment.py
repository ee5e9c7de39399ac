"""
Experiment configuration files.

Grammar: `[section]` headers, `key = value` lines, `#` comments, arrays as
comma lists. Every key remembers its line so validation errors can point
at it. Sections are validated by pydantic models that reject unknown keys.
"""

import logging
import math
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Optional, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.config.presets import PRESETS
from src.core.errors import ConfigError
from src.core.kernels import BoundaryMode, KernelShape, KernelSpec, Normalization
from src.core.params import KellerSegelParams, KsParams, Vorticity2dParams, default_ks_resolution
from src.services.ddpg import DdpgConfig
from src.services.sensing import ActuatorArray, RewardSpec, SensorArray
from src.services.trainer import TrainConfig, TrainingSpec

logger = logging.getLogger(__name__)

SECTIONS = ("env", "sensors", "actuators", "reward", "agent", "training", "output")
ENV_KINDS: dict[str, Type[Union[KsParams, KellerSegelParams, Vorticity2dParams]]] = {
    "ks": KsParams,
    "keller_segel": KellerSegelParams,
    "vorticity2d": Vorticity2dParams,
}
DEFAULT_TARGETS = {"keller_segel": 1.0}


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


@dataclass
class RawSection:
    name: str
    line: Optional[int]
    entries: dict[str, Entry]


def parse_text(text: str, source: str = "<config>") -> dict[str, RawSection]:
    """Splits config text into sections of raw string values."""
    sections: dict[str, RawSection] = {}
    current: Optional[RawSection] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", number, source)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", number, source)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", number, source)
            current = sections[name] = RawSection(name, number, {})
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", number, source)
        if current is None:
            raise ConfigError(f"key {key!r} outside of any section", number, source)
        if key in current.entries:
            raise ConfigError(f"duplicate key {key!r} in [{current.name}]", number, source)
        current.entries[key] = Entry(value.strip(), number)
    return sections


def _is_sequence(annotation: Any) -> bool:
    if typing.get_origin(annotation) is tuple:
        return True
    return any(typing.get_origin(arg) is tuple for arg in typing.get_args(annotation))


def _values(
    model: Type[BaseModel], section: RawSection, source: str, skip: tuple[str, ...] = ()
) -> dict[str, Any]:
    """Raw entries as model input; comma lists become tuples for sequence fields."""
    values: dict[str, Any] = {}
    for key, entry in section.entries.items():
        if key in skip:
            continue
        field = model.model_fields.get(key)
        if field is None:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]", entry.line, source)
        if _is_sequence(field.annotation):
            values[key] = tuple(item.strip() for item in entry.value.split(",") if item.strip())
        else:
            values[key] = entry.value
    return values


def _validate(model: Type[BaseModel], section: RawSection, source: str, values: dict[str, Any]) -> Any:
    """Validates `values`, reporting the first failure at the line of the offending key."""
    try:
        return model.model_validate(values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        entry = section.entries.get(key) if key else None
        line = entry.line if entry is not None else section.line
        where = f"[{section.name}] {key}" if key else f"[{section.name}]"
        raise ConfigError(f"{where}: {error['msg']}", line, source) from exc


def _section(model: Type[BaseModel], section: RawSection, source: str) -> Any:
    return _validate(model, section, source, _values(model, section, source))


class KernelSection(BaseModel):
    kernel: Optional[KernelShape] = None
    sigma: Optional[float] = Field(default=None, gt=0)
    width: Optional[float] = Field(default=None, gt=0)
    weights: Optional[tuple[float, ...]] = None
    normalization: Optional[Normalization] = None
    truncation: Optional[float] = Field(default=None, gt=0)

    def kernel_spec(self, fallback: KernelSpec) -> KernelSpec:
        update = {
            "shape": self.kernel,
            "sigma": self.sigma,
            "width": self.width,
            "weights": self.weights,
            "normalization": self.normalization,
            "truncation": self.truncation,
        }
        merged = fallback.model_dump() | {k: v for k, v in update.items() if v is not None}
        return KernelSpec.model_validate(merged)


class SensorSection(KernelSection):
    model_config = ConfigDict(frozen=True, extra="forbid")

    count: int = Field(default=8, ge=1)
    neighborhood: int = Field(default=1, ge=1)
    boundary: Optional[BoundaryMode] = None

    @field_validator("neighborhood")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"neighborhood size S={value} must be odd")
        return value


class ActuatorSection(KernelSection):
    model_config = ConfigDict(frozen=True, extra="forbid")

    count: Optional[int] = Field(default=None, ge=1)
    u_max: float = Field(default=1.0, gt=0)


class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    run_dir: Optional[str] = None
    snapshots: bool = False


class ExperimentConfig(BaseModel):
    """A fully validated experiment; `train_config()` assembles the run objects."""

    model_config = ConfigDict(frozen=True)

    source: str
    kind: Literal["ks", "keller_segel", "vorticity2d"]
    env: Union[KsParams, KellerSegelParams, Vorticity2dParams]
    sensors: SensorSection
    actuators: ActuatorSection
    reward: RewardSpec
    agent: DdpgConfig
    training: TrainingSpec
    output: OutputSection

    def sensor_array(self) -> SensorArray:
        grid = self.env.grid
        count = self.sensors.count
        axis_count = count if grid.ndim == 1 else math.isqrt(count)
        default = KernelSpec(width=grid.length / axis_count)
        boundary = self.sensors.boundary or ("periodic" if grid.periodic else "truncate")
        return SensorArray.equidistant(
            grid.length,
            count,
            self.sensors.kernel_spec(default),
            neighborhood=self.sensors.neighborhood,
            boundary=boundary,
            ndim=1 if grid.ndim == 1 else 2,
        )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"training": self.training.model_copy(update={"seed": seed})})

    def train_config(self) -> TrainConfig:
        """
        Assembles the run objects. With `[output] snapshots = false` no field
        snapshots are taken; with it on and no explicit times, the fields at
        control activation and at the end of the episode are kept.
        """
        sensors = self.sensor_array()
        count = self.actuators.count if self.actuators.count is not None else sensors.count
        kernel = self.actuators.kernel_spec(sensors.kernel)
        training = self.training
        if not self.output.snapshots:
            training = training.model_copy(update={"snapshot_times": ()})
        config = TrainConfig(
            env=self.env,
            sensors=sensors,
            actuators=ActuatorArray.aligned(sensors, count, kernel, u_max=self.actuators.u_max),
            reward=self.reward,
            agent=self.agent,
            training=training,
        )
        if self.output.snapshots and not training.snapshot_times:
            start = round(config.warmup_time / self.env.dt) * self.env.dt
            times = (start, start + training.episode_steps * self.env.dt)
            training = training.model_copy(update={"snapshot_times": times})
            config = config.model_copy(update={"training": training})
        return config

    def echo(self) -> dict[str, Any]:
        """Resolved configuration with all defaults applied, as written to the run manifest."""
        data = self.model_dump(mode="json", exclude={"source", "kind"})
        data["env"] = {"kind": self.kind, **data["env"]}
        return data


def _env_section(section: RawSection, source: str) -> tuple[str, Any]:
    kind_entry = section.entries.get("kind")
    kind = kind_entry.value if kind_entry is not None else "ks"
    if kind not in ENV_KINDS:
        line = kind_entry.line if kind_entry is not None else section.line
        expected = ", ".join(sorted(ENV_KINDS))
        raise ConfigError(f"unknown environment kind {kind!r}; expected one of {expected}", line, source)
    model = ENV_KINDS[kind]
    values = _values(model, section, source, skip=("kind",))
    if model is KsParams and "L" in values and "n_points" not in values:
        try:
            values["n_points"] = default_ks_resolution(float(values["L"]))
        except ValueError:
            pass
    return kind, _validate(model, section, source, values)


def build_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parses and validates config text; every failure is a ConfigError."""
    sections = parse_text(text, source)
    for name in SECTIONS:
        sections.setdefault(name, RawSection(name, None, {}))

    kind, env = _env_section(sections["env"], source)
    sensors = _section(SensorSection, sections["sensors"], source)
    actuators = _section(ActuatorSection, sections["actuators"], source)
    reward_values = _values(RewardSpec, sections["reward"], source)
    reward_values.setdefault("target", DEFAULT_TARGETS.get(kind, 0.0))
    reward = _validate(RewardSpec, sections["reward"], source, reward_values)

    agent_section = sections["agent"]
    if "u_max" in agent_section.entries:
        raise ConfigError("u_max belongs to [actuators]", agent_section.entries["u_max"].line, source)
    agent_values = _values(DdpgConfig, agent_section, source)
    agent_values["u_max"] = actuators.u_max
    agent = _validate(DdpgConfig, agent_section, source, agent_values)
    training = _section(TrainingSpec, sections["training"], source)
    output = _section(OutputSection, sections["output"], source)

    config = ExperimentConfig(
        source=source,
        kind=kind,  # type: ignore[arg-type]
        env=env,
        sensors=sensors,
        actuators=actuators,
        reward=reward,
        agent=agent,
        training=training,
        output=output,
    )
    try:
        config.train_config()
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"inconsistent experiment: {exc}", None, source) from exc
    return config


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    """Loads a config file, or a preset when `path` names one (with or without `.cfg`)."""
    candidate = Path(path)
    if candidate.is_file():
        config = build_config(candidate.read_text(encoding="utf-8"), str(candidate))
    else:
        name = candidate.name.removesuffix(".cfg")
        if name not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise ConfigError(f"no such config file or preset (presets: {known})", None, str(path))
        config = build_config(PRESETS[name], f"preset:{name}")
    logger.info("Loaded experiment config from %s", config.source)
    return config
