from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator


class ProtocolKind(str, Enum):
    PROPOSED = "proposed"
    HETEROGENEOUS = "heterogeneous"
    BASELINE = "baseline"


class NegativityPolicy(str, Enum):
    CLAMP = "clamp"
    ABORT = "abort"
    OFFSET_WARN = "offset-warn"


class ValidationMode(str, Enum):
    ASSUMPTION1 = "assumption1"
    ASSUMPTION3 = "assumption3"
    COROLLARY1C = "corollary1c"
    COROLLARY3C = "corollary3c"


@dataclass(frozen=True)
class StateVector:
    x: np.ndarray
    k: int = 0
    negativity_events: int = 0
    guard_events: int = 0
    convexity_violations: int = 0
    x_min: float = 0.0
    x_max: float = float("inf")

    @classmethod
    def initial(cls, x0: np.ndarray | list[float], *, x_min: float, x_max: float) -> StateVector:
        x = np.asarray(x0, dtype=float).copy()
        if x.ndim != 1 or x.size == 0:
            raise ValueError("initial state must be a nonempty vector")
        if np.any(x < x_min) or np.any(x > x_max):
            raise ValueError(f"initial states must lie in [{x_min}, {x_max}]")
        return cls(x=x, k=0, x_min=x_min, x_max=x_max)

    @property
    def n_agents(self) -> int:
        return int(self.x.shape[0])

    def advance(self, x: np.ndarray, *, negativity: int = 0, guarded: int = 0, nonconvex: int = 0) -> StateVector:
        return replace(
            self,
            x=x,
            k=self.k + 1,
            negativity_events=self.negativity_events + negativity,
            guard_events=self.guard_events + guarded,
            convexity_violations=self.convexity_violations + nonconvex,
        )


@dataclass(frozen=True)
class NoiseDecomposition:
    """Realized w(k) = Delta L(k) x(k) + v(k) for one step."""

    v: np.ndarray
    delta_L_x: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class ScheduleVerdict:
    mode: str
    passed: bool
    code: str
    message: str
    horizon_limited: bool = False


class PowerLawSchedule(BaseModel):
    """alpha(k) = scale / (k+1)^p * (1 + perturbation / (k+1)).

    ``scale="auto_dmax"`` resolves to 1 / max_i sum_j abar_ij of the model it is bound to.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["power_law"] = "power_law"
    p: PositiveFloat = 0.75
    scale: PositiveFloat | Literal["auto_dmax"] = "auto_dmax"
    perturbation: float = Field(default=0.0, gt=-1.0)

    def resolved_scale(self, d_max: float) -> float:
        if self.scale == "auto_dmax":
            return 1.0 / d_max if d_max > 0 else 1.0
        return float(self.scale)

    def values(self, ks: np.ndarray, d_max: float) -> np.ndarray:
        t = np.asarray(ks, dtype=float) + 1.0
        return self.resolved_scale(d_max) / t**self.p * (1.0 + self.perturbation / t)

    def alpha(self, k: int, d_max: float) -> float:
        t = k + 1.0
        return self.resolved_scale(d_max) / t**self.p * (1.0 + self.perturbation / t)


class ExplicitSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit"] = "explicit"
    values_: tuple[PositiveFloat, ...] = Field(alias="values", min_length=1)

    @property
    def horizon(self) -> int:
        return len(self.values_)

    def values(self, ks: np.ndarray, d_max: float) -> np.ndarray:  # noqa: ARG002
        idx = np.asarray(ks, dtype=int)
        if idx.size and int(idx.max()) >= self.horizon:
            raise IndexError(f"explicit schedule defined for {self.horizon} steps, asked for {int(idx.max())}")
        return np.asarray(self.values_, dtype=float)[idx]

    def alpha(self, k: int, d_max: float) -> float:  # noqa: ARG002
        if k >= self.horizon:
            raise IndexError(f"explicit schedule defined for {self.horizon} steps, asked for {k}")
        return float(self.values_[k])


ScalarSchedule = Annotated[Union[PowerLawSchedule, ExplicitSchedule], Field(discriminator="kind")]


class PerAgentSchedule(BaseModel):
    """A shared schedule with per-agent overrides (agent index -> schedule)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["per_agent"] = "per_agent"
    base: ScalarSchedule = Field(default_factory=PowerLawSchedule)
    overrides: dict[int, ScalarSchedule] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_overrides(self) -> PerAgentSchedule:
        if any(agent < 0 for agent in self.overrides):
            raise ValueError("override agent indices must be nonnegative")
        return self

    def for_agent(self, agent: int) -> PowerLawSchedule | ExplicitSchedule:
        return self.overrides.get(agent, self.base)

    def agent_schedules(self, n_agents: int) -> list[PowerLawSchedule | ExplicitSchedule]:
        return [self.for_agent(i) for i in range(n_agents)]

    def alphas(self, k: int, n_agents: int, d_max: float) -> np.ndarray:
        return np.array([self.for_agent(i).alpha(k, d_max) for i in range(n_agents)], dtype=float)


StepsizeSchedule = Annotated[
    Union[PowerLawSchedule, ExplicitSchedule, PerAgentSchedule], Field(discriminator="kind")
]
