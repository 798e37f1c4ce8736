from .registry import (
    RegisteredScenario,
    ScenarioContract,
    Sweep,
    build_scenario,
    get_scenario,
    get_scenario_contract,
    get_sweep,
    list_scenarios,
    list_sweeps,
)

__all__ = [
    "RegisteredScenario",
    "ScenarioContract",
    "Sweep",
    "build_scenario",
    "get_scenario",
    "get_scenario_contract",
    "get_sweep",
    "list_scenarios",
    "list_sweeps",
]
