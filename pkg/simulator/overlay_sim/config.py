"""Experiment configuration: defaults, the key=value file format and conversion to per-run parameters."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from overlay_sim.engine import SimTime
from overlay_sim.errors import ConfigError
from overlay_sim.simulation import RunParameters
from overlay_sim.strategy import PreemptionConfig, StrategyKind
from overlay_sim.tracker import TrackerConfig
from overlay_sim.workload import WorkloadConfig

U64_MAX = 2**64 - 1

DEFAULT_OMAX = tuple(range(5, 81, 5))


class ExperimentConfig(BaseModel):
    """A full sweep. Durations are in simulated minutes."""

    model_config = ConfigDict(frozen=True)

    strategies: tuple[StrategyKind, ...] = (StrategyKind.TRACKER_DEFAULT,)
    omax_values: tuple[int, ...] = DEFAULT_OMAX
    runs: int = Field(default=10, ge=1)
    max_peer_set: int = Field(default=80, ge=1)
    min_neighbors: int = Field(default=20, ge=0)
    response_size: int = Field(default=80, ge=1)
    min_request_interval: float = Field(default=5.0, ge=0)
    heartbeat_period: float = Field(default=30.0, gt=0)
    expiry_timeout: float = Field(default=45.0, gt=0)
    first_group_size: int = Field(default=80, ge=1)
    workload: WorkloadConfig = WorkloadConfig()
    snapshot_times: tuple[float, ...] = (10.0,)
    horizon: float = Field(default=70.0, ge=0)
    base_seed: int = Field(default=0, ge=0, le=U64_MAX)
    output_dir: Path = Path("results")
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    preemption_cap: Optional[float] = Field(default=None, gt=0, le=1)
    ungraceful_leaves: bool = False
    check_invariants: bool = False

    @field_validator("strategies")
    @classmethod
    def _strategies_present(cls, value: tuple[StrategyKind, ...]) -> tuple[StrategyKind, ...]:
        if not value:
            raise ValueError("at least one strategy is required")
        return tuple(dict.fromkeys(value))

    @field_validator("snapshot_times")
    @classmethod
    def _snapshot_times_sorted(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("at least one snapshot time is required")
        if any(t < 0 for t in value):
            raise ValueError("snapshot times cannot be negative")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def _cross_field_checks(self) -> ExperimentConfig:
        if not self.omax_values:
            raise ValueError("omax_values is empty")
        for omax in self.omax_values:
            if not 1 <= omax <= self.max_peer_set:
                raise ValueError(f"omax {omax} outside [1, {self.max_peer_set}]")
        if self.snapshot_times[-1] > self.horizon:
            raise ValueError(f"snapshot time {self.snapshot_times[-1]:g} is after the horizon {self.horizon:g}")
        return self

    @property
    def snapshot_sim_times(self) -> list[SimTime]:
        return [SimTime.minutes(t) for t in self.snapshot_times]

    @property
    def horizon_time(self) -> SimTime:
        return SimTime.minutes(self.horizon)

    def run_parameters(self, strategy: StrategyKind, omax: int) -> RunParameters:
        return RunParameters(
            strategy=strategy,
            omax=omax,
            max_peer_set=self.max_peer_set,
            min_neighbors=self.min_neighbors,
            first_group_size=self.first_group_size,
            ungraceful_leaves=self.ungraceful_leaves,
            tracker=TrackerConfig(
                response_size=self.response_size,
                min_request_interval=self.min_request_interval,
                heartbeat_period=self.heartbeat_period,
                expiry_timeout=self.expiry_timeout,
            ),
            workload=self.workload,
            preemption=PreemptionConfig(cap_fraction=self.preemption_cap),
        )


def build_config(values: dict[str, Any]) -> ExperimentConfig:
    """Validate raw values into an ExperimentConfig, reporting failures as ConfigError."""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(problems) from e


def parse_strategy(value: str) -> tuple[StrategyKind, ...]:
    value = value.strip().lower()
    if value == "both":
        return (StrategyKind.TRACKER_DEFAULT, StrategyKind.PREEMPTION)
    try:
        return (StrategyKind(value),)
    except ValueError:
        raise ConfigError(f"unknown strategy {value!r}, expected tracker, preemption or both") from None


def parse_omax(value: str) -> tuple[int, ...]:
    """Either a comma list ("5,10,40") or an inclusive range "start:stop:step"."""
    value = value.strip()
    try:
        if ":" not in value:
            return tuple(int(p) for p in value.split(",") if p.strip())
        parts = [int(p) for p in value.split(":")]
    except ValueError:
        raise ConfigError(f"cannot parse omax values {value!r}") from None
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3:
        raise ConfigError(f"omax range {value!r} must be start:stop or start:stop:step")
    start, stop, step = parts
    if step <= 0:
        raise ConfigError(f"omax step must be positive in {value!r}")
    return tuple(range(start, stop + 1, step))


def parse_times(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in value.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"cannot parse times {value!r}") from None


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _parse_optional_float(value: str) -> Optional[float]:
    return None if value.strip().lower() in ("", "none") else float(value)


_WORKLOAD_KEYS = set(WorkloadConfig.model_fields)

# Config-file keys that need more than pydantic's own coercion.
_PARSERS = {
    "strategy": ("strategies", parse_strategy),
    "strategies": ("strategies", parse_strategy),
    "omax": ("omax_values", parse_omax),
    "omax_values": ("omax_values", parse_omax),
    "snapshot_times": ("snapshot_times", parse_times),
    "seed": ("base_seed", int),
    "out": ("output_dir", Path),
    "ungraceful_leaves": ("ungraceful_leaves", _parse_bool),
    "check_invariants": ("check_invariants", _parse_bool),
    "preemption_cap": ("preemption_cap", _parse_optional_float),
}


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_").lower()


def parse_config_text(text: str, origin: Union[str, Path] = "<config>") -> dict[str, Any]:
    """Parse `key = value` lines into raw ExperimentConfig fields; workload keys go into a nested dict."""
    values: dict[str, Any] = {}
    workload: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = normalize_key(key)
        if key in _WORKLOAD_KEYS:
            workload[key] = value
        elif key in _PARSERS:
            field, parser = _PARSERS[key]
            try:
                values[field] = parser(value)
            except ValueError as e:
                raise ConfigError(f"{origin}:{number}: {e}") from None
        elif key in ExperimentConfig.model_fields:
            values[key] = value
        else:
            raise ConfigError(f"{origin}:{number}: unknown key {key!r}")
    if workload:
        values["workload"] = workload
    return values


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}") from e
    return parse_config_text(text, origin=path)
