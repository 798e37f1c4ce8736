#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
for entry in (ROOT, ROOT / "src"):
    if str(entry) not in sys.path:
        sys.path.insert(0, str(entry))

from overair.config import configure_logging, get_settings
from overair.services.harness import compare, run
from simulator.scenarios.registry import build_scenario, get_scenario, get_sweep, list_scenarios, list_sweeps


def _run(args: argparse.Namespace) -> dict[str, object]:
    scenario = build_scenario(args.scenario, horizon=args.horizon, trials=args.trials, seed=args.seed, out=args.out)
    report = run(scenario, workers=args.workers).report
    contract = get_scenario(args.scenario).contract
    ratio = report.mean_lyapunov[-1] / report.mean_lyapunov[0] if report.mean_lyapunov[0] else 0.0
    summary: dict[str, object] = {
        "scenario": report.scenario,
        "trials": report.trials,
        "horizon": report.horizon,
        "final_lyapunov_ratio": ratio,
        "final_mean": report.final_mean.model_dump(),
    }
    if contract.max_final_lyapunov_ratio is not None:
        summary["contract_met"] = ratio < contract.max_final_lyapunov_ratio
    if contract.min_divergent_fraction is not None:
        fraction = sum(r > 1.0 for r in report.divergence_ratios) / report.trials
        summary["divergent_fraction"] = fraction
        summary["contract_met"] = fraction >= contract.min_divergent_fraction
    return summary


def _sweep(args: argparse.Namespace) -> dict[str, object]:
    sweep = get_sweep(args.sweep)
    kwargs = {"horizon": args.horizon, "trials": args.trials, "seed": args.seed}
    a = build_scenario(sweep.scenario_a, **kwargs)
    b = build_scenario(sweep.scenario_b, **kwargs)
    report = compare(a, b, sweep.field, workers=args.workers, out_dir=args.out)
    summary: dict[str, object] = {
        "sweep": sweep.name,
        "field": sweep.field,
        "sign_test": report.sign_test.model_dump(),
        "final_mean_variance_a": report.final_mean_variance_a,
        "final_mean_variance_b": report.final_mean_variance_b,
    }
    if sweep.min_paired_fraction is not None:
        summary["contract_met"] = report.sign_test.fraction_b_higher >= sweep.min_paired_fraction
    return summary


def main() -> None:
    parser = argparse.ArgumentParser(description="Run a registered consensus scenario or sweep")
    target = parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--scenario", help=f"Scenario name ({', '.join(list_scenarios())})")
    target.add_argument("--sweep", help=f"Paired sweep name ({', '.join(list_sweeps())})")
    parser.add_argument("--horizon", type=int, help="Override the horizon K")
    parser.add_argument("--trials", type=int, help="Override the trial count M")
    parser.add_argument("--seed", type=int, help="Override the master seed")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes")
    parser.add_argument("--out", help="Output directory")
    args = parser.parse_args()

    configure_logging(get_settings().log_level, get_settings().log_format)
    summary = _run(args) if args.scenario else _sweep(args)
    print(json.dumps(summary, indent=2))
    if summary.get("contract_met") is False:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
