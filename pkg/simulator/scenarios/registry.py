from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from overair.models.scenario import Scenario

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "scenarios"

Outcome = Literal["diverges", "consensus"]


@dataclass(frozen=True)
class ScenarioContract:
    outcome: Outcome
    max_final_lyapunov_ratio: float | None = None
    min_divergent_fraction: float | None = None


@dataclass(frozen=True)
class RegisteredScenario:
    name: str
    description: str
    fixture: str
    contract: ScenarioContract


@dataclass(frozen=True)
class Sweep:
    name: str
    scenario_a: str
    scenario_b: str
    field: str
    description: str
    min_paired_fraction: float | None = None


_SCENARIOS: dict[str, RegisteredScenario] = {
    "baseline_k5": RegisteredScenario(
        name="baseline_k5",
        description="Ratio-of-powers protocol on K5, x_i(0) = i, sigma^2 = -60 dB: no consensus",
        fixture="baseline_k5.json",
        contract=ScenarioContract(outcome="diverges", min_divergent_fraction=0.67),
    ),
    "varying_noise_0db": RegisteredScenario(
        name="varying_noise_0db",
        description="50 agents, sampled topology (L=3, q=0.6), Lambda = 2, sigma^2 = 0 dB",
        fixture="varying_noise_0db.json",
        contract=ScenarioContract(outcome="consensus"),
    ),
    "varying_noise_20db": RegisteredScenario(
        name="varying_noise_20db",
        description="Same network at sigma^2 = 20 dB",
        fixture="varying_noise_20db.json",
        contract=ScenarioContract(outcome="consensus"),
    ),
    "varying_lambda1": RegisteredScenario(
        name="varying_lambda1",
        description="Same network at Lambda = 1, sigma^2 = 0 dB",
        fixture="varying_lambda1.json",
        contract=ScenarioContract(outcome="consensus"),
    ),
    "ring_weak_consensus": RegisteredScenario(
        name="ring_weak_consensus",
        description="10-agent ring, shared stepsize 1 / (d_max (k+1)^0.75)",
        fixture="ring_weak_consensus.json",
        contract=ScenarioContract(outcome="consensus", max_final_lyapunov_ratio=0.05),
    ),
    "heterogeneous_ring": RegisteredScenario(
        name="heterogeneous_ring",
        description="10-agent ring, per-agent perturbed power laws sharing their leading term",
        fixture="heterogeneous_ring.json",
        contract=ScenarioContract(outcome="consensus", max_final_lyapunov_ratio=0.05),
    ),
}

_SWEEPS: dict[str, Sweep] = {
    "noise": Sweep(
        name="noise",
        scenario_a="varying_noise_0db",
        scenario_b="varying_noise_20db",
        field="channel.sigma2",
        description="Higher noise power gives higher final MSE",
        min_paired_fraction=0.95,
    ),
    "fading": Sweep(
        name="fading",
        scenario_a="varying_lambda1",
        scenario_b="varying_noise_0db",
        field="channel.lambda",
        description="Larger fading variance gives a more spread final mean",
    ),
}


def list_scenarios() -> list[str]:
    return sorted(_SCENARIOS.keys())


def list_sweeps() -> list[str]:
    return sorted(_SWEEPS.keys())


def get_scenario(name: str) -> RegisteredScenario:
    scenario = _SCENARIOS.get(name)
    if scenario is None:
        raise KeyError(f"Unknown scenario: {name}")
    return scenario


def get_sweep(name: str) -> Sweep:
    sweep = _SWEEPS.get(name)
    if sweep is None:
        raise KeyError(f"Unknown sweep: {name}")
    return sweep


def get_scenario_contract(name: str) -> dict[str, object]:
    scenario = get_scenario(name)
    return {
        "name": scenario.name,
        "outcome": scenario.contract.outcome,
        "max_final_lyapunov_ratio": scenario.contract.max_final_lyapunov_ratio,
        "min_divergent_fraction": scenario.contract.min_divergent_fraction,
    }


def build_scenario(
    name: str,
    *,
    horizon: int | None = None,
    trials: int | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> Scenario:
    """Load a registered scenario, optionally scaled down for quick runs."""
    scenario = Scenario.load(FIXTURES / get_scenario(name).fixture)
    return scenario.with_overrides(horizon=horizon, trials=trials, seed=seed, out=out)
