from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, ValidationError, model_validator

from overair.errors import ScenarioConfigError

from .analysis import BoundMode, MetricsTrace
from .channel import ChannelModel
from .protocol import NegativityPolicy, PerAgentSchedule, PowerLawSchedule, ProtocolKind, StepsizeSchedule

GraphKind = Literal["complete", "ring", "standin50", "edges", "file"]
SequenceMode = Literal["static", "sampled", "sequence"]

STANDIN_AGENTS = 50


def _inherit_channel_dimension(data: Any) -> Any:
    """Fill channel.n_agents from the topology when the channel omits it."""
    if not isinstance(data, dict):
        return data
    channel = data.get("channel")
    topology = data.get("topology")
    if isinstance(channel, dict) and "n_agents" not in channel and isinstance(topology, dict):
        n_agents = STANDIN_AGENTS if topology.get("graph") == "standin50" else topology.get("n_agents")
        if n_agents is not None:
            data = {**data, "channel": {**channel, "n_agents": n_agents}}
    return data


class TopologySpec(BaseModel):
    """Where the base graph comes from and how it varies over time."""

    model_config = ConfigDict(frozen=True)

    graph: GraphKind = "complete"
    n_agents: PositiveInt | None = None
    edges: tuple[tuple[int, int], ...] | None = None
    path: str | None = None
    mode: SequenceMode = "static"
    window: PositiveInt = 1
    q: float | None = Field(default=None, gt=0.0, lt=1.0)
    sequence_path: str | None = None

    @model_validator(mode="after")
    def _check(self) -> TopologySpec:
        if self.graph in ("complete", "ring", "edges") and self.n_agents is None:
            raise ValueError(f"graph={self.graph!r} needs n_agents")
        if self.graph == "edges" and self.edges is None:
            raise ValueError("graph='edges' needs an edge list")
        if self.graph == "file" and self.path is None:
            raise ValueError("graph='file' needs a path")
        if self.graph == "standin50" and self.n_agents not in (None, STANDIN_AGENTS):
            raise ValueError(f"the stand-in base graph has {STANDIN_AGENTS} agents")
        if self.mode == "sampled" and self.q is None:
            raise ValueError("mode='sampled' needs q")
        if self.mode == "sequence" and self.sequence_path is None:
            raise ValueError("mode='sequence' needs sequence_path")
        return self

    @property
    def declared_agents(self) -> int | None:
        if self.graph == "standin50":
            return STANDIN_AGENTS
        return self.n_agents


class InitialSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit", "uniform", "index"] = "uniform"
    values: tuple[float, ...] | None = None
    low: float = 0.0
    high: float = 100.0

    @model_validator(mode="after")
    def _check(self) -> InitialSpec:
        if self.kind == "explicit" and not self.values:
            raise ValueError("kind='explicit' needs values")
        if self.kind == "uniform" and self.high < self.low:
            raise ValueError("uniform initial states need low <= high")
        return self

    def bounds(self, n_agents: int) -> tuple[float, float]:
        if self.kind == "explicit" and self.values:
            return min(self.values), max(self.values)
        if self.kind == "index":
            return 1.0, float(n_agents)
        return self.low, self.high

    def sample(self, n_agents: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "explicit" and self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.kind == "index":
            # x_i(0) = i with agents counted from one
            return np.arange(1, n_agents + 1, dtype=float)
        return rng.uniform(self.low, self.high, size=n_agents)


class OutputSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    dir: str | None = None
    thin: PositiveInt | None = None
    full_trace: bool = False
    per_agent_mse: bool = False
    write_traces: bool = True


class Scenario(BaseModel):
    """A complete, reproducible Monte Carlo experiment."""

    model_config = ConfigDict(frozen=True)

    name: str = "scenario"
    topology: TopologySpec
    channel: ChannelModel
    schedule: StepsizeSchedule = Field(default_factory=PowerLawSchedule)
    protocol: ProtocolKind = ProtocolKind.PROPOSED
    initial: InitialSpec = Field(default_factory=InitialSpec)
    horizon: NonNegativeInt = 10_000
    trials: PositiveInt = 100
    seed: int
    output: OutputSpec = Field(default_factory=OutputSpec)
    policy: NegativityPolicy | None = None
    bound_mode: BoundMode | None = None

    @model_validator(mode="before")
    @classmethod
    def _inherit_dimension(cls, data: Any) -> Any:
        return _inherit_channel_dimension(data)

    @model_validator(mode="after")
    def _check_dimensions(self) -> Scenario:
        n = self.channel.n_agents
        declared = self.topology.declared_agents
        if declared is not None and declared != n:
            raise ValueError(f"topology has {declared} agents but channel has {n}")
        if self.initial.kind == "explicit" and self.initial.values is not None and len(self.initial.values) != n:
            raise ValueError(f"initial.values has {len(self.initial.values)} entries, expected {n}")
        if isinstance(self.schedule, PerAgentSchedule):
            stray = [agent for agent in self.schedule.overrides if agent >= n]
            if stray:
                raise ValueError(f"schedule overrides reference unknown agents {stray}")
        if self.protocol == ProtocolKind.BASELINE and self.topology.mode != "static":
            raise ValueError("the baseline protocol runs on a static complete graph")
        return self

    @property
    def n_agents(self) -> int:
        return self.channel.n_agents

    @classmethod
    def from_dict(cls, data: dict[str, Any], *, source: str = "<dict>") -> Scenario:
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ScenarioConfigError.from_validation_error(source, exc) from exc

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        scenario = cls.from_dict(data, source=str(path))
        return scenario.resolve_paths(path.parent)

    def resolve_paths(self, base_dir: Path) -> Scenario:
        """Make topology file references relative to the scenario file."""
        updates: dict[str, Any] = {}
        for field_name in ("path", "sequence_path"):
            value = getattr(self.topology, field_name)
            if value is not None and not Path(value).is_absolute():
                updates[field_name] = str(base_dir / value)
        if not updates:
            return self
        return self.model_copy(update={"topology": self.topology.model_copy(update=updates)})

    def with_overrides(self, **overrides: Any) -> Scenario:
        data = self.model_dump(mode="json", by_alias=True)
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "out":
                data["output"]["dir"] = value
            elif key == "thin":
                data["output"]["thin"] = value
            else:
                data[key] = value
        return Scenario.from_dict(data, source=f"{self.name} (overrides)")


class MomentsSpec(BaseModel):
    """Channel, base graph and frozen states for a conditional-moment check."""

    model_config = ConfigDict(frozen=True)

    topology: TopologySpec
    channel: ChannelModel
    x: tuple[float, ...]
    seed: int | None = None

    @model_validator(mode="before")
    @classmethod
    def _inherit_dimension(cls, data: Any) -> Any:
        return _inherit_channel_dimension(data)

    @model_validator(mode="after")
    def _check_dimensions(self) -> MomentsSpec:
        if len(self.x) != self.channel.n_agents:
            raise ValueError(f"x has {len(self.x)} entries, expected {self.channel.n_agents}")
        return self

    @classmethod
    def load(cls, path: str | Path) -> MomentsSpec:
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        try:
            spec = cls.model_validate(data)
        except ValidationError as exc:
            raise ScenarioConfigError.from_validation_error(str(path), exc) from exc
        if spec.topology.path is not None and not Path(spec.topology.path).is_absolute():
            topology = spec.topology.model_copy(update={"path": str(path.parent / spec.topology.path)})
            spec = spec.model_copy(update={"topology": topology})
        return spec


@dataclass(frozen=True)
class TrialResult:
    trial: int
    final_state: np.ndarray
    trace: MetricsTrace
    negativity_events: int
    guard_events: int
    convexity_violations: int
    wall_time: float

    @property
    def final_mean(self) -> float:
        return float(self.final_state.mean())

    @property
    def final_mse(self) -> float:
        return float(np.mean((self.final_state - self.trace.initial_average) ** 2))
