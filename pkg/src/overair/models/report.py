from __future__ import annotations

from pydantic import BaseModel, Field

from .analysis import BoundConstants
from .protocol import NegativityPolicy, ProtocolKind
from .topology import ConnectivityCertificate


class FinalMeanSummary(BaseModel):
    mean: float
    variance: float
    standard_error: float


class EventTotals(BaseModel):
    negativity: int = 0
    guard: int = 0
    convexity: int = 0


class RunReport(BaseModel):
    """Aggregate of one scenario's trials, folded in trial-index order."""

    scenario: str
    protocol: ProtocolKind
    policy: NegativityPolicy
    seed: int
    trials: int
    horizon: int
    n_agents: int
    initial_average: float
    steps: list[int]
    mean_lyapunov: list[float]
    mean_network_mean: list[float]
    mean_mse: list[float]
    final_mean: FinalMeanSummary
    final_mse: list[float]
    divergence_ratios: list[float]
    events: EventTotals
    wall_time: float
    traces: list[str] = Field(default_factory=list)


class SignTest(BaseModel):
    """Paired ordering of final MSE, B against A."""

    trials: int
    b_higher: int
    ties: int
    fraction_b_higher: float
    p_value: float


class CompareReport(BaseModel):
    scenario_a: str
    scenario_b: str
    sweep: str
    steps: list[int]
    mse_difference: list[float]
    sign_test: SignTest
    final_mean_variance_a: float
    final_mean_variance_b: float
    final_mse_a: float
    final_mse_b: float


class CheckResult(BaseModel):
    name: str
    passed: bool
    code: str
    message: str
    horizon_limited: bool = False


class ValidationReport(BaseModel):
    scenario: str
    checks: list[CheckResult]
    base_fiedler: float | None = None
    bounds: BoundConstants | None = None
    notes: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


class ConnectivityReport(BaseModel):
    source: str
    aligned: bool
    certificates: list[ConnectivityCertificate]

    @property
    def passed(self) -> bool:
        return all(cert.connected for cert in self.certificates)

    @property
    def first_failure(self) -> ConnectivityCertificate | None:
        return next((cert for cert in self.certificates if not cert.connected), None)
