from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import structlog
from pydantic import BaseModel

from overair.config import configure_logging, get_settings
from overair.errors import OverairError, ScenarioConfigError
from overair.models.scenario import MomentsSpec, Scenario
from overair.services.harness import check_connectivity, compare, estimate_moments, run, validate
from overair.services.moments import MIN_DRAWS
from overair.services.traces import write_report

logger = structlog.get_logger(__name__)


def _print(payload: BaseModel | dict[str, Any]) -> None:
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    print(json.dumps(data, indent=2))


def _load_scenario(path: str, args: argparse.Namespace) -> Scenario:
    scenario = Scenario.load(path)
    return scenario.with_overrides(
        seed=args.seed,
        trials=args.trials,
        out=args.out,
        thin=args.thin,
        policy=args.policy,
        bound_mode=args.bound_mode,
    )


def _run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, args)
    result = run(scenario, workers=args.workers)
    report = result.report
    _print(
        {
            "scenario": report.scenario,
            "trials": report.trials,
            "horizon": report.horizon,
            "initial_average": report.initial_average,
            "final_mean": report.final_mean.model_dump(),
            "final_lyapunov": report.mean_lyapunov[-1],
            "events": report.events.model_dump(),
            "traces": len(report.traces),
        }
    )
    return 0


def _compare(args: argparse.Namespace) -> int:
    a = _load_scenario(args.scenario_a, args)
    b = _load_scenario(args.scenario_b, args)
    report = compare(a, b, args.sweep, workers=args.workers, out_dir=args.out)
    _print(report.sign_test)
    return 0


def _validate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, args)
    report = validate(scenario, bound_mode=args.bound_mode)
    if args.out:
        write_report(report, Path(args.out) / "validation.json")
    _print({"scenario": report.scenario, "passed": report.passed, "checks": [c.model_dump() for c in report.checks]})
    return 0 if report.passed else 1


def _check_connectivity(args: argparse.Namespace) -> int:
    report = check_connectivity(args.sequence, aligned=not args.sliding)
    failure = report.first_failure
    _print(
        {
            "source": report.source,
            "windows": len(report.certificates),
            "passed": report.passed,
            "first_failure": failure.model_dump() if failure is not None else None,
        }
    )
    return 0 if report.passed else 1


def _moments(args: argparse.Namespace) -> int:
    spec = MomentsSpec.load(args.model)
    report = estimate_moments(spec, args.draws, seed=args.seed)
    if args.out:
        write_report(report, Path(args.out) / "moments.json")
    _print(report)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Master seed (overrides the scenario)")
    common.add_argument("--trials", type=int, help="Number of Monte Carlo trials")
    common.add_argument("--out", help="Output directory for traces and reports")
    common.add_argument("--thin", type=int, help="Keep every N-th step of each trace")
    common.add_argument("--policy", choices=["clamp", "abort", "offset-warn"], help="Negative-state policy")
    common.add_argument("--bound-mode", choices=["paper", "consistent"], help="Bound constant convention")
    common.add_argument("--workers", type=int, help="Worker processes for the trials")

    parser = argparse.ArgumentParser(
        prog="overair",
        description="Average consensus over noisy non-coherent over-the-air channels",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", parents=[common], help="Run a scenario")
    run_parser.add_argument("scenario", help="Scenario JSON file")
    run_parser.set_defaults(handler=_run)

    compare_parser = commands.add_parser("compare", parents=[common], help="Paired run of two scenarios")
    compare_parser.add_argument("scenario_a")
    compare_parser.add_argument("scenario_b")
    compare_parser.add_argument("--sweep", required=True, help="Dotted field allowed to differ, e.g. channel.sigma2")
    compare_parser.set_defaults(handler=_compare)

    validate_parser = commands.add_parser("validate", parents=[common], help="Admissibility and connectivity checks")
    validate_parser.add_argument("scenario")
    validate_parser.set_defaults(handler=_validate)

    connectivity_parser = commands.add_parser("check-connectivity", help="Certify a topology sequence file")
    connectivity_parser.add_argument("sequence")
    connectivity_parser.add_argument("--sliding", action="store_true", help="Check every window, not only aligned ones")
    connectivity_parser.set_defaults(handler=_check_connectivity)

    moments_parser = commands.add_parser("moments", help="Monte Carlo check of the round statistics")
    moments_parser.add_argument("model", help="JSON with channel, topology and frozen states x")
    moments_parser.add_argument("--draws", type=int, default=MIN_DRAWS * 10)
    moments_parser.add_argument("--seed", type=int)
    moments_parser.add_argument("--out")
    moments_parser.set_defaults(handler=_moments)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(get_settings().log_level, get_settings().log_format)
    try:
        return int(args.handler(args))
    except ScenarioConfigError as exc:
        # stderr carries exactly one JSON document for this exit
        print(json.dumps(exc.as_dict(), indent=2), file=sys.stderr)
        return 2
    except (OverairError, ValueError) as exc:
        logger.error("Command failed", command=args.command, error=str(exc), error_type=type(exc).__name__)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
