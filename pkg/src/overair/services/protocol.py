from __future__ import annotations

import numpy as np
import structlog

from overair.config import get_settings
from overair.errors import DivisionNearZero, InadmissibleSchedule, NegativeStateUnderAbortPolicy
from overair.models.channel import ChannelModel, RoundDraw
from overair.models.protocol import (
    ExplicitSchedule,
    NegativityPolicy,
    NoiseDecomposition,
    PerAgentSchedule,
    PowerLawSchedule,
    ScheduleVerdict,
    StateVector,
)
from overair.models.topology import PhysicalTopology, TopologySequence

from .analysis import expected_laplacian, realized_weights
from .channel import draw_round, transmit_amplitudes
from .graph import active_mask, failed_nodes_mask
from .schedules import alpha_vector, d_max

logger = structlog.get_logger(__name__)

StepResult = tuple[StateVector, RoundDraw, NoiseDecomposition]

_CONTRACTION_TOL = 1e-12


def _policy(policy: NegativityPolicy | str | None) -> NegativityPolicy:
    if policy is None:
        return NegativityPolicy(get_settings().negativity_policy)
    return NegativityPolicy(policy)


def _alphas(
    schedule: PowerLawSchedule | ExplicitSchedule | PerAgentSchedule,
    k: int,
    n_agents: int,
    dmax: float,
) -> np.ndarray:
    try:
        return alpha_vector(schedule, k, n_agents, dmax)
    except IndexError as exc:
        verdict = ScheduleVerdict("step", False, "horizon_exceeded", str(exc), horizon_limited=True)
        raise InadmissibleSchedule(verdict) from exc


def apply_round(
    model: ChannelModel,
    alphas: np.ndarray,
    state: StateVector,
    draw: RoundDraw,
    policy: NegativityPolicy | str | None = None,
) -> StepResult:
    """Apply an already drawn round; ``draw.active_mask`` and ``draw.failed`` describe G(k)."""
    policy = _policy(policy)
    k = state.k
    x = state.x
    failed = draw.failed
    expected = expected_laplacian(model, draw.active_mask)
    degrees = expected.degrees

    overshoot = alphas * degrees
    if np.any(overshoot > 1.0 + _CONTRACTION_TOL):
        agent = int(np.argmax(overshoot))
        verdict = ScheduleVerdict(
            "step",
            False,
            "stepsize_too_large",
            f"step {k}: agent {agent} has alpha * sum_j abar = {overshoot[agent]:.6g} > 1",
        )
        raise InadmissibleSchedule(verdict)

    # gamma = 0 agents transmit too, in the second slot
    transmitting = draw.pairing.any(axis=0) & ~failed
    amplitudes, offset = transmit_amplitudes(model, x, policy, transmitting=transmitting, step=k)
    signal = (draw.pairing * draw.h) @ amplitudes + draw.noise
    power = np.abs(signal) ** 2
    corrected = power - model.sigma2_vector - offset * degrees

    x_next = (1.0 - alphas * degrees) * x + alphas * corrected
    x_next[failed] = x[failed]

    a = realized_weights(model, draw)
    v = corrected - a @ x
    v[failed] = 0.0
    delta_L_x = (a - expected.a_bar) @ x
    noise = NoiseDecomposition(v=v, delta_L_x=delta_L_x, w=v + delta_L_x)

    negativity = int(np.count_nonzero((x_next < 0.0) & ~failed))
    # realized row weights can exceed 1 / alpha even when the expected ones do not
    nonconvex = int(np.count_nonzero((alphas * a.sum(axis=1) > 1.0 + _CONTRACTION_TOL) & ~failed))
    return state.advance(x_next, negativity=negativity, nonconvex=nonconvex), draw, noise


def _advance(
    model: ChannelModel,
    seq: TopologySequence,
    alphas: np.ndarray,
    state: StateVector,
    rng: np.random.Generator,
    policy: NegativityPolicy,
) -> StepResult:
    draw = draw_round(model, active_mask(seq, state.k), rng, failed=failed_nodes_mask(seq, state.k))
    return apply_round(model, alphas, state, draw, policy)


def step(
    model: ChannelModel,
    seq: TopologySequence,
    schedule: PowerLawSchedule | ExplicitSchedule,
    state: StateVector,
    rng: np.random.Generator,
    *,
    policy: NegativityPolicy | str | None = None,
    dmax: float | None = None,
) -> StepResult:
    """One round of the over-the-air consensus update with a shared stepsize.

    Non-failed agents apply x_i <- (1 - alpha * sum_j abar_ij(k)) x_i + alpha (|y_i|^2 - sigma_i^2);
    failed agents keep their state.
    """
    if isinstance(schedule, PerAgentSchedule):
        raise TypeError("per-agent schedules run through step_heterogeneous")
    dmax = d_max(model, seq.base) if dmax is None else dmax
    alphas = _alphas(schedule, state.k, state.n_agents, dmax)
    return _advance(model, seq, alphas, state, rng, _policy(policy))


def step_heterogeneous(
    model: ChannelModel,
    seq: TopologySequence,
    schedules: PerAgentSchedule | PowerLawSchedule | ExplicitSchedule,
    state: StateVector,
    rng: np.random.Generator,
    *,
    policy: NegativityPolicy | str | None = None,
    dmax: float | None = None,
) -> StepResult:
    """Same round with A(k) = diag(alpha_1(k), ..., alpha_N(k))."""
    dmax = d_max(model, seq.base) if dmax is None else dmax
    alphas = _alphas(schedules, state.k, state.n_agents, dmax)
    return _advance(model, seq, alphas, state, rng, _policy(policy))


def step_baseline(
    model: ChannelModel,
    topo: PhysicalTopology,
    state: StateVector,
    rng: np.random.Generator,
    *,
    policy: NegativityPolicy | str | None = None,
    guard: float | None = None,
    strict: bool = False,
) -> StateVector:
    """Ratio-of-powers comparison protocol over one shared channel draw.

    Every agent hears every neighbour in full duplex twice through the same fading and
    noise: once carrying sqrt(x_j), once carrying 1. The new state is the power ratio.
    A denominator below ``guard`` holds the agent's state and counts a guard event.
    """
    guard = get_settings().division_guard if guard is None else guard
    x = state.x
    draw = draw_round(model, topo, rng, half_duplex=False)
    if np.any(x < 0.0) and _policy(policy) == NegativityPolicy.ABORT:
        agent = int(np.flatnonzero(x < 0.0)[0])
        raise NegativeStateUnderAbortPolicy(agent=agent, value=float(x[agent]), step=state.k)

    amplitudes = np.sqrt(np.maximum(x, 0.0))
    numerator = np.abs(draw.h @ amplitudes + draw.noise) ** 2
    denominator = np.abs(draw.h.sum(axis=1) + draw.noise) ** 2

    guarded = denominator < guard
    if guarded.any():
        agent = int(np.flatnonzero(guarded)[0])
        if strict:
            raise DivisionNearZero(agent=agent, denominator=float(denominator[agent]))
        logger.warning(
            "Comparison protocol denominator below guard; holding state",
            step=state.k,
            agents=np.flatnonzero(guarded).tolist(),
        )

    x_next = x.copy()
    safe = ~guarded
    x_next[safe] = numerator[safe] / denominator[safe]
    return state.advance(x_next, guarded=int(np.count_nonzero(guarded)))
