"""Monte Carlo orchestration: scenarios to trials, trials to reports."""

from __future__ import annotations

import multiprocessing
import time
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np
import structlog
from scipy.stats import binomtest

from overair.config import LogFormat, configure_logging, get_settings
from overair.errors import (
    BaseDisconnected,
    BoundHorizonTooSmall,
    CertificationFailed,
    DimensionMismatch,
    InadmissibleSchedule,
    ScenarioMismatch,
    TopologyError,
)
from overair.models.analysis import BoundConstants, MetricsTrace, MomentReport
from overair.models.channel import ChannelModel
from overair.models.protocol import (
    NegativityPolicy,
    PerAgentSchedule,
    ProtocolKind,
    ScheduleVerdict,
    StateVector,
    ValidationMode,
)
from overair.models.report import (
    CheckResult,
    CompareReport,
    ConnectivityReport,
    EventTotals,
    FinalMeanSummary,
    RunReport,
    SignTest,
    ValidationReport,
)
from overair.models.scenario import MomentsSpec, Scenario, TrialResult
from overair.models.topology import PhysicalTopology, TopologySequence

from .analysis import base_fiedler, divergence_ratio
from .bounds import bound_constants
from .graph import (
    base_from_spec,
    certify_sequence,
    first_failure,
    is_jointly_connected,
    load_sequence,
    sequence_from_spec,
)
from .moments import estimate_conditional_moments
from .protocol import step, step_baseline, step_heterogeneous
from .schedules import d_max, validate_schedule
from .streams import topology_rng, trial_rng
from .traces import should_record, trace_path, write_report, write_trace

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class PreparedScenario:
    """Everything a trial needs, built once per scenario and shared by every trial."""

    scenario: Scenario
    model: ChannelModel
    base: PhysicalTopology
    seq: TopologySequence
    dmax: float
    policy: NegativityPolicy
    stride: int


@dataclass
class RunResult:
    report: RunReport
    trials: list[TrialResult] = field(default_factory=list)


def _policy(scenario: Scenario) -> NegativityPolicy:
    if scenario.policy is not None:
        return scenario.policy
    return NegativityPolicy(get_settings().negativity_policy)


def _stride(scenario: Scenario) -> int:
    if scenario.output.thin is not None:
        return scenario.output.thin
    if scenario.output.full_trace:
        return 1
    return get_settings().thin_stride(scenario.horizon)


def prepare(scenario: Scenario) -> PreparedScenario:
    base = base_from_spec(scenario.topology)
    if base.n_agents != scenario.n_agents:
        raise DimensionMismatch(expected=scenario.n_agents, got=base.n_agents, what="base graph")
    seq = sequence_from_spec(scenario.topology, base, scenario.horizon, topology_rng(scenario.seed))
    if seq.n_agents != scenario.n_agents:
        raise DimensionMismatch(expected=scenario.n_agents, got=seq.n_agents, what="topology sequence")
    return PreparedScenario(
        scenario=scenario,
        model=scenario.channel,
        base=base,
        seq=seq,
        dmax=d_max(scenario.channel, base),
        policy=_policy(scenario),
        stride=_stride(scenario),
    )


def _check_admissible(prepared: PreparedScenario) -> None:
    scenario = prepared.scenario
    if scenario.protocol == ProtocolKind.BASELINE:
        return
    graph = prepared.base.to_networkx()
    if prepared.base.n_agents > 1 and not nx.is_connected(graph):
        raise BaseDisconnected(prepared.base.n_agents, nx.number_connected_components(graph))
    verdict = validate_schedule(scenario.schedule, prepared.model, ValidationMode.ASSUMPTION1, topo=prepared.base)
    if not verdict.passed:
        if not verdict.horizon_limited:
            raise InadmissibleSchedule(verdict)
        logger.warning("Schedule verdict limited by its horizon", code=verdict.code, message=verdict.message)
    if scenario.topology.mode == "sequence":
        failure = first_failure(certify_sequence(prepared.seq))
        if failure is not None:
            raise TopologyError(
                f"window starting at step {failure.window_start} is not jointly connected"
            )


def _simulate(prepared: PreparedScenario, trial: int) -> TrialResult:
    """Initial states are drawn first, then the rounds in step order."""
    scenario = prepared.scenario
    started = time.perf_counter()
    rng = trial_rng(scenario.seed, trial)
    n = scenario.n_agents
    horizon = scenario.horizon

    x0 = scenario.initial.sample(n, rng)
    x_min, x_max = scenario.initial.bounds(n)
    state = StateVector.initial(x0, x_min=x_min, x_max=x_max)
    trace = MetricsTrace(initial_average=float(x0.mean()), keep_mse=scenario.output.per_agent_mse)
    trace.record(0, state.x, 0)

    heterogeneous = scenario.protocol == ProtocolKind.HETEROGENEOUS or isinstance(
        scenario.schedule, PerAgentSchedule
    )
    clamp_reported = False
    for _ in range(horizon):
        if scenario.protocol == ProtocolKind.BASELINE:
            state = step_baseline(prepared.model, prepared.base, state, rng, policy=prepared.policy)
        elif heterogeneous:
            state, _, _ = step_heterogeneous(
                prepared.model, prepared.seq, scenario.schedule, state, rng, policy=prepared.policy, dmax=prepared.dmax
            )
        else:
            state, _, _ = step(
                prepared.model, prepared.seq, scenario.schedule, state, rng, policy=prepared.policy, dmax=prepared.dmax
            )
        if not clamp_reported and prepared.policy == NegativityPolicy.CLAMP and state.negativity_events:
            logger.warning("Negative state will be clamped before transmission", step=state.k)
            clamp_reported = True
        if should_record(state.k, horizon, prepared.stride):
            trace.record(state.k, state.x, state.negativity_events + state.guard_events)

    return TrialResult(
        trial=trial,
        final_state=state.x,
        trace=trace,
        negativity_events=state.negativity_events,
        guard_events=state.guard_events,
        convexity_violations=state.convexity_violations,
        wall_time=time.perf_counter() - started,
    )


def run_trial(prepared: PreparedScenario, trial: int) -> TrialResult:
    """One trial on its own (seed, trial) stream; log events carry the scenario and trial."""
    with structlog.contextvars.bound_contextvars(scenario=prepared.scenario.name, trial=trial):
        return _simulate(prepared, trial)


# Set in each pool worker by _init_worker; the prepared scenario is shipped once per worker.
_WORKER_SCENARIO: PreparedScenario | None = None


def _init_worker(prepared: PreparedScenario, log_level: str, log_format: LogFormat) -> None:
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = prepared
    configure_logging(log_level, log_format)


def _trial_worker(trial: int) -> TrialResult:
    if _WORKER_SCENARIO is None:
        raise RuntimeError("worker started without a scenario")
    return run_trial(_WORKER_SCENARIO, trial)


def run_trials(
    prepared: PreparedScenario,
    trials: Iterable[int] | None = None,
    *,
    workers: int | None = None,
) -> list[TrialResult]:
    """Run trials serially or on a process pool; results come back in trial-index order."""
    indices = list(range(prepared.scenario.trials)) if trials is None else list(trials)
    settings = get_settings()
    workers = settings.workers if workers is None else workers
    results: list[TrialResult] = []
    if workers <= 1 or len(indices) <= 1:
        for trial in indices:
            results.append(run_trial(prepared, trial))
    else:
        initargs = (prepared, settings.log_level, settings.log_format)
        with multiprocessing.Pool(min(workers, len(indices)), initializer=_init_worker, initargs=initargs) as pool:
            for result in pool.imap_unordered(_trial_worker, indices):
                results.append(result)
    results.sort(key=lambda result: result.trial)
    return results


def aggregate(prepared: PreparedScenario, results: list[TrialResult], traces: list[str] | None = None) -> RunReport:
    scenario = prepared.scenario
    if not results:
        raise ValueError("no trials to aggregate")
    steps = results[0].trace.steps
    lyapunov = np.array([result.trace.lyapunov for result in results])
    means = np.array([result.trace.network_mean for result in results])
    mse = np.array([result.trace.mse_curve() for result in results])
    final_means = np.array([result.final_mean for result in results])
    variance = float(final_means.var(ddof=1)) if final_means.size > 1 else 0.0

    return RunReport(
        scenario=scenario.name,
        protocol=scenario.protocol,
        policy=prepared.policy,
        seed=scenario.seed,
        trials=len(results),
        horizon=scenario.horizon,
        n_agents=scenario.n_agents,
        initial_average=float(np.mean([result.trace.initial_average for result in results])),
        steps=list(steps),
        mean_lyapunov=lyapunov.mean(axis=0).tolist(),
        mean_network_mean=means.mean(axis=0).tolist(),
        mean_mse=mse.mean(axis=0).tolist(),
        final_mean=FinalMeanSummary(
            mean=float(final_means.mean()),
            variance=variance,
            standard_error=float(np.sqrt(variance / final_means.size)),
        ),
        final_mse=[result.final_mse for result in results],
        divergence_ratios=[divergence_ratio(result.trace) for result in results],
        events=EventTotals(
            negativity=sum(result.negativity_events for result in results),
            guard=sum(result.guard_events for result in results),
            convexity=sum(result.convexity_violations for result in results),
        ),
        wall_time=float(sum(result.wall_time for result in results)),
        traces=traces or [],
    )


def _out_dir(scenario: Scenario, out_dir: str | Path | None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if scenario.output.dir is not None:
        return Path(scenario.output.dir)
    return Path(get_settings().output_dir) / scenario.name


def run(
    scenario: Scenario,
    *,
    workers: int | None = None,
    out_dir: str | Path | None = None,
    write: bool = True,
) -> RunResult:
    """Run every trial of ``scenario``; write per-trial CSV traces and ``report.json``."""
    prepared = prepare(scenario)
    _check_admissible(prepared)
    logger.info(
        "Run started",
        scenario=scenario.name,
        protocol=scenario.protocol.value,
        trials=scenario.trials,
        horizon=scenario.horizon,
        stride=prepared.stride,
    )
    results = run_trials(prepared, workers=workers)

    paths: list[str] = []
    target = _out_dir(scenario, out_dir)
    if write and scenario.output.write_traces:
        for result in results:
            paths.append(str(write_trace(result.trace, trace_path(target, scenario.name, result.trial))))
    report = aggregate(prepared, results, paths)
    if write:
        write_report(report, target / "report.json")
    logger.info(
        "Run finished",
        scenario=scenario.name,
        final_mean=report.final_mean.mean,
        final_mean_variance=report.final_mean.variance,
        negativity_events=report.events.negativity,
        guard_events=report.events.guard,
        convexity_violations=report.events.convexity,
    )
    return RunResult(report=report, trials=results)


# --- paired comparison -------------------------------------------------------


def _flatten(data: Any, prefix: str = "") -> dict[str, Any]:
    if isinstance(data, dict):
        flat: dict[str, Any] = {}
        for key, value in data.items():
            flat.update(_flatten(value, f"{prefix}.{key}" if prefix else str(key)))
        return flat
    return {prefix: data}


def scenario_differences(a: Scenario, b: Scenario) -> list[str]:
    """Dotted field paths whose values differ, ignoring names and output settings."""
    left = _flatten(a.model_dump(mode="json", by_alias=True, exclude={"name", "output"}))
    right = _flatten(b.model_dump(mode="json", by_alias=True, exclude={"name", "output"}))
    return sorted(key for key in left.keys() | right.keys() if left.get(key) != right.get(key))


def _swept(key: str, sweep: str) -> bool:
    return key == sweep or key.startswith(sweep + ".")


def compare(
    a: Scenario,
    b: Scenario,
    sweep: str,
    *,
    workers: int | None = None,
    out_dir: str | Path | None = None,
    write: bool = True,
) -> CompareReport:
    """Run A and B on common random numbers and compare their MSE trajectories."""
    stray = [key for key in scenario_differences(a, b) if not _swept(key, sweep)]
    if stray:
        raise ScenarioMismatch(stray, sweep)

    target = Path(out_dir) if out_dir is not None else Path(get_settings().output_dir) / f"compare_{a.name}_{b.name}"
    label_a, label_b = (a.name, b.name) if a.name != b.name else ("a", "b")
    result_a = run(a, workers=workers, out_dir=target / label_a, write=write)
    result_b = run(b, workers=workers, out_dir=target / label_b, write=write)

    final_a = np.array(result_a.report.final_mse)
    final_b = np.array(result_b.report.final_mse)
    b_higher = int(np.count_nonzero(final_b > final_a))
    ties = int(np.count_nonzero(final_b == final_a))
    decided = final_a.size - ties
    p_value = float(binomtest(b_higher, decided, 0.5, alternative="greater").pvalue) if decided else 1.0

    report = CompareReport(
        scenario_a=a.name,
        scenario_b=b.name,
        sweep=sweep,
        steps=result_a.report.steps,
        mse_difference=(
            np.array(result_b.report.mean_mse) - np.array(result_a.report.mean_mse)
        ).tolist(),
        sign_test=SignTest(
            trials=int(final_a.size),
            b_higher=b_higher,
            ties=ties,
            fraction_b_higher=b_higher / final_a.size,
            p_value=p_value,
        ),
        final_mean_variance_a=result_a.report.final_mean.variance,
        final_mean_variance_b=result_b.report.final_mean.variance,
        final_mse_a=float(final_a.mean()),
        final_mse_b=float(final_b.mean()),
    )
    if write:
        write_report(report, target / f"compare_{sweep}.json")
    logger.info(
        "Comparison finished",
        sweep=sweep,
        fraction_b_higher=report.sign_test.fraction_b_higher,
        p_value=p_value,
    )
    return report


# --- validation --------------------------------------------------------------


def _check(name: str, verdict: ScheduleVerdict) -> CheckResult:
    return CheckResult(
        name=name,
        passed=verdict.passed,
        code=verdict.code,
        message=verdict.message,
        horizon_limited=verdict.horizon_limited,
    )


def _reference_state(scenario: Scenario) -> np.ndarray:
    """A worst case over the initial-state spec, used for the bound constants."""
    n = scenario.n_agents
    initial = scenario.initial
    if initial.kind == "explicit" and initial.values is not None:
        return np.asarray(initial.values, dtype=float)
    if initial.kind == "index":
        return np.arange(1, n + 1, dtype=float)
    return np.full(n, max(abs(initial.low), abs(initial.high)))


def _connectivity_check(scenario: Scenario, base: PhysicalTopology) -> tuple[CheckResult, TopologySequence | None]:
    try:
        seq = sequence_from_spec(scenario.topology, base, scenario.horizon, topology_rng(scenario.seed))
    except BaseDisconnected as exc:
        return CheckResult(name="assumption2", passed=False, code="base_disconnected", message=str(exc)), None
    except CertificationFailed as exc:
        return CheckResult(name="assumption2", passed=False, code="certification_failed", message=str(exc)), None

    if scenario.topology.mode == "static":
        certificates = [is_jointly_connected(seq, 0, seq.window)]
    else:
        certificates = certify_sequence(seq)
    failure = first_failure(certificates)
    if failure is not None:
        message = f"window starting at step {failure.window_start} (length {failure.window_len}) is disconnected"
        return CheckResult(name="assumption2", passed=False, code="window_disconnected", message=message), seq
    weakest = min((cert.fiedler_value for cert in certificates), default=0.0)
    message = f"{len(certificates)} windows of length {seq.window} connected; smallest lambda2 {weakest:.4g}"
    return CheckResult(name="assumption2", passed=True, code="connected", message=message), seq


def validate(scenario: Scenario, *, bound_mode: str | None = None) -> ValidationReport:
    """Every admissibility and connectivity check for ``scenario``, without simulating."""
    base = base_from_spec(scenario.topology)
    model = scenario.channel
    checks: list[CheckResult] = []
    notes: list[str] = []

    if scenario.protocol == ProtocolKind.BASELINE:
        for name in ("assumption1", "assumption3"):
            checks.append(
                CheckResult(name=name, passed=True, code="not_applicable", message="the comparison protocol has no stepsize")
            )
    else:
        checks.append(_check("assumption1", validate_schedule(scenario.schedule, model, ValidationMode.ASSUMPTION1, topo=base)))
        checks.append(_check("assumption3", validate_schedule(scenario.schedule, model, ValidationMode.ASSUMPTION3, topo=base)))
        if isinstance(scenario.schedule, PerAgentSchedule):
            for mode in (ValidationMode.COROLLARY1C, ValidationMode.COROLLARY3C):
                verdict = validate_schedule(scenario.schedule, model, mode, topo=base, horizon=scenario.horizon)
                checks.append(_check(mode.value, verdict))

    connectivity, seq = _connectivity_check(scenario, base)
    checks.append(connectivity)

    fiedler_value: float | None = None
    if connectivity.code != "base_disconnected":
        fiedler_value = base_fiedler(model, base)

    bounds: BoundConstants | None = None
    if scenario.protocol != ProtocolKind.BASELINE and all(check.passed for check in checks):
        time_varying = seq if scenario.topology.mode != "static" else None
        try:
            bounds = bound_constants(
                model,
                base,
                scenario.schedule,
                bound_mode or scenario.bound_mode,
                x0=_reference_state(scenario),
                horizon=max(scenario.horizon, 1),
                seq=time_varying,
            )
        except (BoundHorizonTooSmall, InadmissibleSchedule) as exc:
            notes.append(f"bound constants unavailable: {exc}")

    report = ValidationReport(
        scenario=scenario.name,
        checks=checks,
        base_fiedler=fiedler_value,
        bounds=bounds,
        notes=notes,
    )
    for check in checks:
        logger.info("Validation verdict", check=check.name, passed=check.passed, code=check.code)
    return report


def check_connectivity(path: str | Path, *, aligned: bool = True) -> ConnectivityReport:
    seq = load_sequence(path)
    certificates = certify_sequence(seq, aligned=aligned)
    report = ConnectivityReport(source=str(path), aligned=aligned, certificates=certificates)
    failure = report.first_failure
    logger.info(
        "Connectivity checked",
        source=str(path),
        windows=len(certificates),
        first_failure=failure.window_start if failure is not None else None,
    )
    return report


def estimate_moments(spec: MomentsSpec, draws: int, *, seed: int | None = None) -> MomentReport:
    base = base_from_spec(spec.topology)
    stream_seed = seed if seed is not None else spec.seed if spec.seed is not None else get_settings().default_seed
    return estimate_conditional_moments(spec.channel, base, np.asarray(spec.x, dtype=float), draws, trial_rng(stream_seed, 0))
