from __future__ import annotations

import math

import numpy as np

from overair.config import get_settings
from overair.models.channel import ChannelModel
from overair.models.protocol import (
    ExplicitSchedule,
    PerAgentSchedule,
    PowerLawSchedule,
    ScheduleVerdict,
    ValidationMode,
)
from overair.models.topology import PhysicalTopology

from .channel import expected_weights

ScalarSchedule = PowerLawSchedule | ExplicitSchedule
Schedule = PowerLawSchedule | ExplicitSchedule | PerAgentSchedule

_BOUNDARY_TOL = 1e-12
_SLOPE_TOL = 0.02
_MIN_HEURISTIC_STEPS = 16


def expected_degrees(model: ChannelModel, topo: PhysicalTopology | None = None) -> np.ndarray:
    """sum_j abar_ij on ``topo``; without a topology every pair with Lambda_ij > 0 is a link."""
    mask = topo.adjacency if topo is not None else ~np.eye(model.n_agents, dtype=bool)
    return expected_weights(model, mask).sum(axis=1)


def d_max(model: ChannelModel, topo: PhysicalTopology | None = None) -> float:
    return float(expected_degrees(model, topo).max())


def alpha_vector(schedule: Schedule, k: int, n_agents: int, dmax: float) -> np.ndarray:
    """Per-agent stepsizes at step k; a shared schedule gives a constant vector."""
    if isinstance(schedule, PerAgentSchedule):
        return schedule.alphas(k, n_agents, dmax)
    return np.full(n_agents, schedule.alpha(k, dmax))


def schedule_matrix(schedule: Schedule, horizon: int, n_agents: int, dmax: float) -> np.ndarray:
    """alpha_i(k) for k < horizon, shape (n_agents, horizon)."""
    ks = np.arange(horizon)
    if isinstance(schedule, PerAgentSchedule):
        return np.vstack([s.values(ks, dmax) for s in schedule.agent_schedules(n_agents)])
    return np.tile(schedule.values(ks, dmax), (n_agents, 1))


def power_law_sup(schedule: PowerLawSchedule, dmax: float) -> float:
    """sup_k alpha(k). A negative perturbation can push the peak past k = 0."""
    p, c = schedule.p, schedule.perturbation
    candidates = [1.0]
    if c < 0.0:
        peak = -c * (p + 1.0) / p
        candidates += [float(max(1, math.floor(peak))), float(math.ceil(peak))]
    return max(schedule.alpha(int(t) - 1, dmax) for t in candidates if t >= 1.0)


def _verdict(mode: ValidationMode, passed: bool, code: str, message: str, *, horizon_limited: bool = False) -> ScheduleVerdict:
    return ScheduleVerdict(mode.value, passed, code, message, horizon_limited)


def _loglog_slope(values: np.ndarray) -> float:
    ks = np.arange(values.size, dtype=float) + 1.0
    tail = slice(values.size // 2, values.size)
    slope, _ = np.polyfit(np.log(ks[tail]), np.log(values[tail]), 1)
    return float(slope)


# --- assumption1: summability and contraction ---------------------------------


def _summability(schedule: ScalarSchedule, mode: ValidationMode, who: str) -> ScheduleVerdict:
    if isinstance(schedule, PowerLawSchedule):
        p = schedule.p
        if p <= 0.5:
            return _verdict(mode, False, "square_sum_diverges", f"{who}: p={p} <= 0.5, sum of alpha^2 diverges")
        if p > 1.0:
            return _verdict(mode, False, "sum_converges", f"{who}: p={p} > 1, sum of alpha converges")
        return _verdict(mode, True, "admissible", f"{who}: p={p} in (0.5, 1]")

    values = np.asarray(schedule.values_, dtype=float)
    if values.size < _MIN_HEURISTIC_STEPS:
        return _verdict(
            mode,
            False,
            "insufficient_horizon",
            f"{who}: {values.size} values are too few to estimate the decay exponent",
            horizon_limited=True,
        )
    p_est = -_loglog_slope(values)
    if p_est <= 0.5 + _SLOPE_TOL:
        return _verdict(
            mode, False, "square_sum_diverges", f"{who}: tail decays like k^-{p_est:.3f}", horizon_limited=True
        )
    if p_est > 1.0 + _SLOPE_TOL:
        return _verdict(
            mode, False, "sum_converges", f"{who}: tail decays like k^-{p_est:.3f}", horizon_limited=True
        )
    return _verdict(
        mode,
        True,
        "admissible",
        f"{who}: tail decays like k^-{p_est:.3f} over {values.size} steps",
        horizon_limited=True,
    )


def _contraction(schedule: ScalarSchedule, degree: float, mode: ValidationMode, who: str, dmax: float) -> ScheduleVerdict:
    if isinstance(schedule, PowerLawSchedule):
        peak = power_law_sup(schedule, dmax)
        limited = False
    else:
        peak = float(max(schedule.values_))
        limited = True
    product = peak * degree
    if product > 1.0 + _BOUNDARY_TOL:
        return _verdict(
            mode,
            False,
            "stepsize_too_large",
            f"{who}: sup alpha * sum_j abar = {product:.6g} > 1",
            horizon_limited=limited,
        )
    if product >= 1.0 - _BOUNDARY_TOL:
        return _verdict(
            mode,
            True,
            "boundary",
            f"{who}: sup alpha * sum_j abar = 1 at k = 0",
            horizon_limited=limited,
        )
    return _verdict(mode, True, "admissible", f"{who}: sup alpha * sum_j abar = {product:.6g}", horizon_limited=limited)


def _assumption1(schedule: Schedule, degrees: np.ndarray, dmax: float) -> ScheduleVerdict:
    mode = ValidationMode.ASSUMPTION1
    if isinstance(schedule, PerAgentSchedule):
        checks = [
            (f"agent {i}", s, float(degrees[i])) for i, s in enumerate(schedule.agent_schedules(degrees.size))
        ]
    else:
        checks = [("schedule", schedule, dmax)]

    boundary = False
    limited = False
    for who, scalar, degree in checks:
        summable = _summability(scalar, mode, who)
        if not summable.passed:
            return summable
        contraction = _contraction(scalar, degree, mode, who, dmax)
        if not contraction.passed:
            return contraction
        boundary = boundary or contraction.code == "boundary"
        limited = limited or summable.horizon_limited or contraction.horizon_limited

    if boundary:
        return _verdict(
            mode,
            True,
            "boundary",
            "conditions a) and b) hold; b) is tight at k = 0",
            horizon_limited=limited,
        )
    return _verdict(mode, True, "admissible", "conditions a) and b) hold", horizon_limited=limited)


# --- assumption3: monotone stepsizes -----------------------------------------


def _monotone(schedule: ScalarSchedule, who: str, dmax: float) -> ScheduleVerdict:
    mode = ValidationMode.ASSUMPTION3
    if isinstance(schedule, PowerLawSchedule):
        p, c = schedule.p, schedule.perturbation
        if c >= -p / (p + 1.0):
            return _verdict(
                mode, True, "admissible", f"{who}: nonincreasing, alpha(k)/alpha(k+1) -> 1"
            )
        stop = int(math.ceil(-c * (p + 1.0) / p)) + 2
        values = schedule.values(np.arange(stop), dmax)
        if np.any(np.diff(values) > 0.0):
            return _verdict(mode, False, "not_monotone", f"{who}: alpha increases before k = {stop}")
        return _verdict(mode, True, "admissible", f"{who}: nonincreasing, alpha(k)/alpha(k+1) -> 1")

    values = np.asarray(schedule.values_, dtype=float)
    if values.size > 1 and np.any(np.diff(values) > 0.0):
        first = int(np.flatnonzero(np.diff(values) > 0.0)[0])
        return _verdict(
            mode, False, "not_monotone", f"{who}: alpha({first + 1}) > alpha({first})", horizon_limited=True
        )
    ratio = float(np.max(values[:-1] / values[1:])) if values.size > 1 else 1.0
    return _verdict(
        mode,
        True,
        "admissible",
        f"{who}: nonincreasing over {values.size} steps, max ratio {ratio:.4g}",
        horizon_limited=True,
    )


def _assumption3(schedule: Schedule, n_agents: int, dmax: float) -> ScheduleVerdict:
    if isinstance(schedule, PerAgentSchedule):
        for i, scalar in enumerate(schedule.agent_schedules(n_agents)):
            verdict = _monotone(scalar, f"agent {i}", dmax)
            if not verdict.passed:
                return verdict
        return _verdict(ValidationMode.ASSUMPTION3, True, "admissible", "every agent's stepsize is nonincreasing")
    return _monotone(schedule, "schedule", dmax)


# --- heterogeneous stepsizes ---------------------------------------------------


def _shared_leading_term(schedules: list[ScalarSchedule], dmax: float) -> tuple[bool, str]:
    leading = [(s.p, s.resolved_scale(dmax)) for s in schedules if isinstance(s, PowerLawSchedule)]
    p0, scale0 = leading[0]
    if all(math.isclose(p, p0, rel_tol=1e-12) and math.isclose(scale, scale0, rel_tol=1e-12) for p, scale in leading):
        return True, "every agent shares p and scale; differences decay one order faster"
    pairs = ", ".join(f"(p={p}, scale={scale:.4g})" for p, scale in sorted(set(leading)))
    return False, f"agents use different leading terms {pairs}"


def _corollary(schedule: Schedule, n_agents: int, dmax: float, mode: ValidationMode, horizon: int) -> ScheduleVerdict:
    if not isinstance(schedule, PerAgentSchedule) or not schedule.overrides:
        return _verdict(mode, True, "homogeneous", "all agents use the same stepsize")

    schedules = schedule.agent_schedules(n_agents)
    if all(isinstance(s, PowerLawSchedule) for s in schedules):
        shared, message = _shared_leading_term(schedules, dmax)
        return _verdict(mode, shared, "admissible" if shared else "stepsizes_diverge", message)

    finite = [s.horizon for s in schedules if isinstance(s, ExplicitSchedule)]
    steps = min([horizon, *finite])
    if steps < _MIN_HEURISTIC_STEPS:
        return _verdict(
            mode, False, "insufficient_horizon", f"only {steps} steps to compare", horizon_limited=True
        )
    alphas = schedule_matrix(schedule, steps, n_agents, dmax)
    spread = alphas.max(axis=0) - alphas.min(axis=0)
    if mode == ValidationMode.COROLLARY1C:
        ratio = spread / alphas.sum(axis=0)
        if np.all(ratio == 0.0):
            return _verdict(mode, True, "admissible", "stepsizes coincide", horizon_limited=True)
        slope = _loglog_slope(np.maximum(ratio, np.finfo(float).tiny))
        passed = slope < -_SLOPE_TOL
        return _verdict(
            mode,
            passed,
            "admissible" if passed else "stepsizes_diverge",
            f"spread / sum decays like k^{slope:.3f} over {steps} steps",
            horizon_limited=True,
        )
    if np.all(spread == 0.0):
        return _verdict(mode, True, "admissible", "stepsizes coincide", horizon_limited=True)
    slope = _loglog_slope(np.maximum(spread, np.finfo(float).tiny))
    passed = slope < -1.0 - _SLOPE_TOL
    return _verdict(
        mode,
        passed,
        "admissible" if passed else "spread_not_summable",
        f"max spread decays like k^{slope:.3f} over {steps} steps",
        horizon_limited=True,
    )


def validate_schedule(
    schedule: Schedule,
    model: ChannelModel,
    mode: ValidationMode | str,
    *,
    topo: PhysicalTopology | None = None,
    horizon: int | None = None,
) -> ScheduleVerdict:
    """Admissibility verdict for one condition; never raises on an inadmissible schedule.

    ``corollary1c`` and ``corollary3c`` check per-agent summability and their named spread
    condition; the per-agent contraction condition is part of ``assumption1``.
    """
    mode = ValidationMode(mode)
    degrees = expected_degrees(model, topo)
    dmax = float(degrees.max())
    if mode == ValidationMode.ASSUMPTION1:
        return _assumption1(schedule, degrees, dmax)
    if mode == ValidationMode.ASSUMPTION3:
        return _assumption3(schedule, model.n_agents, dmax)

    if isinstance(schedule, PerAgentSchedule):
        for i, scalar in enumerate(schedule.agent_schedules(model.n_agents)):
            summable = _summability(scalar, mode, f"agent {i}")
            if not summable.passed:
                return summable
    horizon = get_settings().default_horizon if horizon is None else horizon
    return _corollary(schedule, model.n_agents, dmax, mode, horizon)
