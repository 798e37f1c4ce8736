from __future__ import annotations

import pytest

from overair.models.protocol import ProtocolKind
from overair.services.harness import scenario_differences
from simulator.scenarios.registry import (
    build_scenario,
    get_scenario,
    get_scenario_contract,
    get_sweep,
    list_scenarios,
    list_sweeps,
)


def test_scenarios_expose_contract_metadata() -> None:
    assert list_scenarios() == [
        "baseline_k5",
        "heterogeneous_ring",
        "ring_weak_consensus",
        "varying_lambda1",
        "varying_noise_0db",
        "varying_noise_20db",
    ]
    assert list_sweeps() == ["fading", "noise"]

    contract = get_scenario_contract("baseline_k5")
    assert contract["outcome"] == "diverges"
    assert contract["min_divergent_fraction"] == pytest.approx(0.67)

    ring = get_scenario("ring_weak_consensus")
    assert ring.contract.outcome == "consensus"
    assert ring.contract.max_final_lyapunov_ratio == pytest.approx(0.05)


def test_every_registered_fixture_loads() -> None:
    for name in list_scenarios():
        scenario = build_scenario(name)
        assert scenario.name == name
    assert build_scenario("baseline_k5").protocol == ProtocolKind.BASELINE
    assert build_scenario("heterogeneous_ring").protocol == ProtocolKind.HETEROGENEOUS


def test_build_scenario_applies_quick_run_overrides() -> None:
    scenario = build_scenario("ring_weak_consensus", horizon=100, trials=2, seed=9, out="runs/quick")
    assert scenario.horizon == 100
    assert scenario.trials == 2
    assert scenario.seed == 9
    assert scenario.output.dir == "runs/quick"


@pytest.mark.parametrize("name", ["noise", "fading"])
def test_sweep_pairs_differ_only_in_their_field(name: str) -> None:
    sweep = get_sweep(name)
    a = build_scenario(sweep.scenario_a)
    b = build_scenario(sweep.scenario_b)
    assert scenario_differences(a, b) == [sweep.field]


def test_unknown_names_raise_key_error() -> None:
    with pytest.raises(KeyError):
        get_scenario("missing")
    with pytest.raises(KeyError):
        get_sweep("missing")
