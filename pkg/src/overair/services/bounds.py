"""Mean-square bound constants for the over-the-air consensus protocol.

Two evaluation modes:

``paper``
    the literal constants: 8 Lambda^2 in C_L, 7 sigma^4 in C_M2, and the contraction
    factor 1 - 2 alpha lambda_2 + alpha^2 (|Lbar|^2 + C_L + C_M1) for E|x(k)|^2.
``consistent``
    the moments of the CN(0, Lambda) convention: E|h|^4 = 2 Lambda^2, Var|n|^2 = sigma^4,
    the cross-fading sum counted over ordered pairs with E[Gamma_ij Gamma_il] exact, the
    fading-noise sum with its factor 4, and the factor |I - alpha Lbar|^2 + alpha^2 (C_L + C_M1)
    (the state norm keeps its average component, so this factor never drops below one).

Sums and suprema run to ``horizon``; power-law tails past it are bounded analytically and
reported as the upper end of an interval.
"""

from __future__ import annotations

import math

import numpy as np
import structlog
from scipy.linalg import eigvalsh

from overair.config import get_settings
from overair.errors import BoundHorizonTooSmall, InadmissibleSchedule
from overair.models.analysis import BoundConstants, BoundMode, Interval
from overair.models.channel import ChannelModel
from overair.models.protocol import (
    ExplicitSchedule,
    PerAgentSchedule,
    PowerLawSchedule,
    ScheduleVerdict,
)
from overair.models.topology import PhysicalTopology, TopologySequence

from .analysis import expected_laplacian, fiedler
from .graph import active_mask
from .schedules import schedule_matrix

logger = structlog.get_logger(__name__)

Schedule = PowerLawSchedule | ExplicitSchedule | PerAgentSchedule


def moment_constants(
    model: ChannelModel,
    topo: PhysicalTopology,
    mode: BoundMode | str,
    x0: np.ndarray,
) -> tuple[float, float, float]:
    """(C_L, C_M1, C_M2) on the base graph."""
    mode = BoundMode(mode)
    paper = mode == BoundMode.PAPER
    mask = np.array(topo.adjacency, dtype=bool)
    lam = model.lambda_matrix * mask
    pair = model.pair_probability * mask
    rho = model.rho
    p = model.p_vector
    sigma2 = model.sigma2_vector
    a_bar = rho * pair * lam

    fourth_moment = 8.0 if paper else 2.0
    C_L = float(np.sum(fourth_moment * lam**2 * rho**2 * pair - a_bar**2))

    weights = rho * lam
    if paper:
        # 1/2 rho^2 Lambda_ij Lambda_il Gbar_ij Gbar_il over ordered j != l
        wg = weights * pair
        per_agent = 0.5 * (wg.sum(axis=1) ** 2 - (wg**2).sum(axis=1))
    else:
        # E[Gamma_ij Gamma_il] = p_i (1-p_j)(1-p_l) + (1-p_i) p_j p_l; each unordered
        # pair appears twice in the cross-fading sum, which doubles its second moment
        quiet = weights * (1.0 - p)[None, :]
        loud = weights * p[None, :]
        per_agent = p * (quiet.sum(axis=1) ** 2 - (quiet**2).sum(axis=1)) + (1.0 - p) * (
            loud.sum(axis=1) ** 2 - (loud**2).sum(axis=1)
        )
    C_M1 = float(per_agent.sum())

    m2 = 0.5 * rho * lam * sigma2[:, None] * pair
    noise_moment = 7.0 if paper else 1.0
    cross_factor = 2.0 if paper else 4.0
    x_peak = float(np.max(x0)) if np.size(x0) else 0.0
    C_M2 = float(np.sum(noise_moment * sigma2**2 + cross_factor * m2.sum(axis=1) * x_peak))
    return C_L, C_M1, C_M2


def _max_subarray(logs: np.ndarray) -> float:
    """Largest sum over contiguous runs, the empty run (0) included."""
    best = 0.0
    running = 0.0
    for value in logs:
        running = max(0.0, running + float(value))
        best = max(best, running)
    return best


def _scalar_tail(schedule: PowerLawSchedule | ExplicitSchedule, horizon: int, dmax: float) -> float:
    """Upper bound on sum_{t >= horizon} alpha(t)^2."""
    if isinstance(schedule, ExplicitSchedule):
        return 0.0
    p = schedule.p
    if p <= 0.5:
        verdict = ScheduleVerdict("bounds", False, "square_sum_diverges", f"p={p} <= 0.5")
        raise InadmissibleSchedule(verdict)
    amplitude = schedule.resolved_scale(dmax) * max(1.0, 1.0 + schedule.perturbation / (horizon + 1.0))
    # alpha(t) <= amplitude / (t+1)^p for t >= horizon; compare the sum with its integral
    return amplitude**2 * horizon ** (1.0 - 2.0 * p) / (2.0 * p - 1.0)


def _tails(schedule: Schedule, horizon: int, n_agents: int, dmax: float) -> np.ndarray:
    if isinstance(schedule, PerAgentSchedule):
        return np.array([_scalar_tail(s, horizon, dmax) for s in schedule.agent_schedules(n_agents)])
    return np.full(n_agents, _scalar_tail(schedule, horizon, dmax))


def _effective_horizon(schedule: Schedule, horizon: int, n_agents: int) -> tuple[int, list[str]]:
    scalars = schedule.agent_schedules(n_agents) if isinstance(schedule, PerAgentSchedule) else [schedule]
    finite = [s.horizon for s in scalars if isinstance(s, ExplicitSchedule)]
    if finite and min(finite) < horizon:
        return min(finite), [f"explicit schedule ends at step {min(finite)}; sums stop there"]
    if finite:
        return horizon, ["explicit schedule: sums cover its listed values only"]
    return horizon, []


def _exp(value: float) -> float:
    return math.exp(value) if value < 709.0 else float("inf")


def _interval(low: float, high: float) -> Interval:
    return Interval(low=low, high=max(low, high))


def _time_varying(
    model: ChannelModel,
    seq: TopologySequence,
    alpha: np.ndarray,
    C: float,
    C_M2: float,
    x0_sq: float,
    notes: list[str],
) -> dict[str, float]:
    horizon = alpha.size
    window = seq.window
    n = seq.n_agents
    norms = np.empty(horizon)
    phi3 = np.empty(horizon)
    window_lambda2: list[float] = []
    window_sum = np.zeros((n, n))
    for k in range(horizon):
        L_k = expected_laplacian(model, active_mask(seq, k)).L_bar
        spectrum = eigvalsh(L_k)
        norms[k] = float(np.abs(spectrum).max())
        phi3[k] = float(np.max((1.0 - alpha[k] * spectrum) ** 2)) + alpha[k] ** 2 * C
        window_sum += L_k
        if (k + 1) % window == 0:
            window_lambda2.append(max(fiedler(window_sum), 0.0))
            window_sum = np.zeros((n, n))

    windows = [m for m in range(len(window_lambda2)) if (m + 1) * window < horizon]
    result: dict[str, float] = {}
    if not windows:
        notes.append("horizon shorter than two windows; time-varying constants skipped")
        return result

    ratio = max(alpha[m * window] / alpha[(m + 1) * window] for m in windows)
    M_L = ratio**2 * (2.0 ** (2 * window) - 2 * window - 1) * max(float(norms.max()), 1.0) ** (2 * window)
    B1 = M_L + ratio**2 * C
    lambda2_inf = min(window_lambda2[m] for m in windows)
    if lambda2_inf <= get_settings().connectivity_tol:
        notes.append("some window's expected Laplacian sum is disconnected")

    with np.errstate(over="ignore", invalid="ignore"):
        energy = x0_sq
        peak = 0.0
        for m in windows:
            start = m * window
            block = range(start, start + window)
            # sup over k0 in [0, L] of prod_{i<start+k0} phi3(i), and of the matching noise sum
            products = [1.0]
            sums = [0.0]
            for i in block:
                products.append(products[-1] * phi3[i])
                sums.append(sums[-1] * phi3[i] + alpha[i] ** 2 * C_M2 * phi3[i])
            peak = max(peak, max(products) * energy + max(sums))
            contraction = 1.0 - 2.0 * lambda2_inf * alpha[(m + 1) * window] + alpha[(m + 1) * window] ** 2 * B1
            energy = contraction * (energy + sums[-1])
        M2_bar = C * peak + C_M2

    result.update(
        M_L=float(M_L),
        B1=float(B1),
        ratio_constant=float(ratio),
        window_lambda2_inf=float(lambda2_inf),
        M2_bar=float(M2_bar),
    )
    notes.append(f"M2_bar takes the supremum over {len(windows)} windows inside the horizon")
    return result


def bound_constants(
    model: ChannelModel,
    topo: PhysicalTopology,
    schedule: Schedule,
    mode: BoundMode | str | None = None,
    *,
    x0: np.ndarray,
    horizon: int | None = None,
    seq: TopologySequence | None = None,
) -> BoundConstants:
    settings = get_settings()
    mode = BoundMode(mode or settings.bound_mode)
    horizon = settings.default_horizon if horizon is None else horizon
    if horizon < 1:
        raise BoundHorizonTooSmall(horizon=horizon, reason="no steps to evaluate")

    x0 = np.asarray(x0, dtype=float)
    n = model.n_agents
    notes: list[str] = []
    horizon, horizon_notes = _effective_horizon(schedule, horizon, n)
    notes.extend(horizon_notes)

    expected = expected_laplacian(model, topo)
    L_bar = expected.L_bar
    spectrum = eigvalsh(L_bar)
    lambda2 = max(float(spectrum[1]), 0.0) if n > 1 else 0.0
    L_norm = float(np.abs(spectrum).max())
    dmax = expected.d_max

    C_L, C_M1, C_M2 = moment_constants(model, topo, mode, x0)
    C = C_L + C_M1

    alphas = schedule_matrix(schedule, horizon, n, dmax)
    alpha = alphas.max(axis=0)
    tails = _tails(schedule, horizon, n, dmax)
    sums = (alphas**2).sum(axis=1)
    sum_alpha2 = _interval(float(sums.max()), float((sums + tails).max()))
    tail = float(tails.max())

    heterogeneous = isinstance(schedule, PerAgentSchedule) and bool(schedule.overrides)
    if heterogeneous:
        identity = np.eye(n)
        step_norms = np.array([np.linalg.norm(identity - np.diag(a) @ L_bar, 2) for a in alphas.T])
    else:
        step_norms = np.sqrt(np.max((1.0 - np.outer(alpha, spectrum)) ** 2, axis=1))

    if mode == BoundMode.PAPER:
        factors = 1.0 - 2.0 * alpha * lambda2 + alpha**2 * L_norm**2 + alpha**2 * C
        if factors[-1] > 1.0:
            raise BoundHorizonTooSmall(
                horizon=horizon,
                reason=f"state-norm factor {factors[-1]:.6g} still exceeds 1 at the last step",
            )
        if np.any(np.diff(alpha) > 0.0):
            notes.append("stepsize not monotone; factors past the horizon assumed below one")
        logs = np.log(factors)
        prefix = np.cumsum(logs)
        phi_prefix = _interval(_exp(float(prefix.max())), _exp(float(prefix.max())))
        sub = _max_subarray(logs)
        phi_sub = _interval(_exp(sub), _exp(sub))
    else:
        factors = step_norms**2 + alpha**2 * C
        if alpha[-1] * L_norm > 2.0:
            raise BoundHorizonTooSmall(
                horizon=horizon,
                reason="alpha * |Lbar| still exceeds 2 at the last step",
            )
        logs = np.log(factors)
        prefix = np.cumsum(logs)
        tail_log = C * tail
        phi_prefix = _interval(_exp(float(prefix.max())), _exp(float(prefix.max()) + tail_log))
        sub = _max_subarray(logs)
        phi_sub = _interval(_exp(sub), _exp(sub + tail_log))

    x0_sq = float(x0 @ x0)
    with np.errstate(over="ignore", invalid="ignore"):
        m1_low = C * (phi_prefix.low * x0_sq + phi_sub.low * C_M2 * sum_alpha2.low) + C_M2
        m1_high = C * (phi_prefix.high * x0_sq + phi_sub.high * C_M2 * sum_alpha2.high) + C_M2
    M1_bar = _interval(float(m1_low), float(m1_high))

    product_norm_sup: float | None = None
    scale = 1.0
    if heterogeneous:
        product_norm_sup = _exp(2.0 * _max_subarray(np.log(step_norms)))
        scale = product_norm_sup
        notes.append("product norm bounded submultiplicatively inside the horizon")
    variance_bound = _interval(
        M1_bar.low / n * scale * sum_alpha2.low,
        M1_bar.high / n * scale * sum_alpha2.high,
    )

    extra: dict[str, float] = {}
    variance_tv: Interval | None = None
    if seq is not None:
        extra = _time_varying(model, seq, alpha, C, C_M2, x0_sq, notes)
        if "M2_bar" in extra:
            variance_tv = _interval(
                extra["M2_bar"] / n * sum_alpha2.low,
                extra["M2_bar"] / n * sum_alpha2.high,
            )

    constants = BoundConstants(
        mode=mode,
        horizon=horizon,
        C_L=C_L,
        C_M1=C_M1,
        C_M2=C_M2,
        lambda2=lambda2,
        L_bar_norm=L_norm,
        phi1_sup_prefix=phi_prefix,
        phi1_sup=phi_sub,
        sum_alpha2=sum_alpha2,
        M1_bar=M1_bar,
        variance_bound=variance_bound,
        product_norm_sup=product_norm_sup,
        variance_bound_time_varying=variance_tv,
        notes=notes,
        **extra,
    )
    logger.info("Bound constants evaluated", mode=mode.value, horizon=horizon, C_L=C_L, C_M1=C_M1, C_M2=C_M2)
    return constants
