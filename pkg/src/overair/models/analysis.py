from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field


class BoundMode(str, Enum):
    PAPER = "paper"
    CONSISTENT = "consistent"


@dataclass(frozen=True)
class LaplacianSet:
    """Expected weights abar_ij, their row sums D and Lbar = D - Abar."""

    a_bar: np.ndarray
    degrees: np.ndarray
    L_bar: np.ndarray

    @property
    def d_max(self) -> float:
        return float(self.degrees.max()) if self.degrees.size else 0.0


@dataclass(frozen=True)
class RealizedLaplacian:
    """Per-round a(k), L(k) = D - A(k) and Delta L(k) = Lbar - L(k)."""

    a: np.ndarray
    L: np.ndarray
    delta_L: np.ndarray


@dataclass
class MetricsTrace:
    """Per-step consensus metrics; ``steps`` holds the step index of each stored row."""

    initial_average: float
    steps: list[int] = field(default_factory=list)
    lyapunov: list[float] = field(default_factory=list)
    network_mean: list[float] = field(default_factory=list)
    mse: list[np.ndarray] = field(default_factory=list)
    events: list[int] = field(default_factory=list)
    keep_mse: bool = False
    n_agents: int = 0

    def record(self, k: int, x: np.ndarray, events: int) -> None:
        mean = float(x.mean())
        self.n_agents = int(x.shape[0])
        self.steps.append(k)
        self.lyapunov.append(float(np.sum((x - mean) ** 2)))
        self.network_mean.append(mean)
        self.events.append(events)
        if self.keep_mse:
            self.mse.append((x - self.initial_average) ** 2)

    def mse_curve(self) -> np.ndarray:
        """(1/N) sum_i (x_i(k) - xbar(0))^2, recovered from V(k) and the network mean."""
        lyap = np.asarray(self.lyapunov, dtype=float)
        drift = np.asarray(self.network_mean, dtype=float) - self.initial_average
        return lyap / max(self.n_agents, 1) + drift**2

    def __len__(self) -> int:
        return len(self.steps)


class Interval(BaseModel):
    low: float
    high: float

    @property
    def width(self) -> float:
        return self.high - self.low


class BoundConstants(BaseModel):
    """Mean-square bound constants.

    Every supremum or infinite sum is evaluated up to ``horizon`` and reported as an
    interval whose upper end also covers the tail past the horizon.
    """

    mode: BoundMode
    horizon: int
    C_L: float
    C_M1: float
    C_M2: float
    lambda2: float
    L_bar_norm: float
    phi1_sup_prefix: Interval
    phi1_sup: Interval
    sum_alpha2: Interval
    M1_bar: Interval
    variance_bound: Interval
    product_norm_sup: float | None = None
    M_L: float | None = None
    B1: float | None = None
    ratio_constant: float | None = None
    window_lambda2_inf: float | None = None
    M2_bar: float | None = None
    variance_bound_time_varying: Interval | None = None
    notes: list[str] = Field(default_factory=list)


class MomentCheck(BaseModel):
    name: str
    empirical: float
    standard_error: float
    expected: float
    passed: bool
    reference: str = "convention-consistent"


class MomentReport(BaseModel):
    draws: int
    gate_se: float
    checks: list[MomentCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.reference == "convention-consistent")

    def get(self, name: str) -> MomentCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)
