"""Per-round randomness and the non-coherent over-the-air receiver.

Stream layout of one round (``draw_round``), consumed in this order:

1. ``gamma``: n uniforms, gamma_i = u_i < p_i
2. ``h``: two standard normals (Re, Im) per active ordered pair, row-major over the
   active adjacency, scaled by sqrt(Lambda_ij / 2)
3. ``noise``: two standard normals per agent, scaled by sqrt(sigma_i^2 / 2)

``draw_rounds`` draws a whole block in the same per-variable order (all gammas, then all
fading, then all noise), so it does not replay ``draw_round`` call by call.
The carrier symbol is the unit real value, so a transmitter sends sqrt(rho * x).
"""

from __future__ import annotations

import numpy as np
import structlog

from overair.errors import DimensionMismatch, NegativeStateUnderAbortPolicy
from overair.models.channel import ChannelModel, RoundBatch, RoundDraw, SignalBreakdown
from overair.models.protocol import NegativityPolicy, StateVector
from overair.models.topology import PhysicalTopology

logger = structlog.get_logger(__name__)

Topology = PhysicalTopology | np.ndarray


def _mask_of(topo: Topology) -> np.ndarray:
    if isinstance(topo, PhysicalTopology):
        return np.array(topo.adjacency, dtype=bool)
    return np.asarray(topo, dtype=bool)


def _check_dimension(model: ChannelModel, n: int, what: str) -> None:
    if model.n_agents != n:
        raise DimensionMismatch(expected=model.n_agents, got=n, what=what)


def _states(x: StateVector | np.ndarray) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.x
    return np.asarray(x, dtype=float)


def expected_weights(model: ChannelModel, topo: Topology) -> np.ndarray:
    """abar_ij = rho (p_i(1-p_j) + p_j(1-p_i)) Lambda_ij on active edges, zero elsewhere."""
    mask = _mask_of(topo)
    _check_dimension(model, mask.shape[0], "topology")
    return model.rho * model.pair_probability * model.lambda_matrix * mask


def draw_round(
    model: ChannelModel,
    topo: Topology,
    rng: np.random.Generator,
    *,
    failed: np.ndarray | None = None,
    half_duplex: bool = True,
) -> RoundDraw:
    """One step's slot bits, fading and noise on the active topology.

    ``half_duplex=False`` skips the slot draw (every gamma is 0); the comparison protocol
    uses it on the complete graph where every agent hears every other.
    """
    mask = _mask_of(topo)
    n = mask.shape[0]
    _check_dimension(model, n, "topology")

    if half_duplex:
        gamma = rng.random(n) < model.p_vector
    else:
        gamma = np.zeros(n, dtype=bool)

    rows, cols = np.nonzero(mask)
    h = np.zeros((n, n), dtype=complex)
    if rows.size:
        scale = np.sqrt(model.lambda_matrix[rows, cols] / 2.0)
        parts = rng.standard_normal((rows.size, 2))
        h[rows, cols] = scale * (parts[:, 0] + 1j * parts[:, 1])

    noise_parts = rng.standard_normal((n, 2))
    noise = np.sqrt(model.sigma2_vector / 2.0) * (noise_parts[:, 0] + 1j * noise_parts[:, 1])

    failed_mask = np.zeros(n, dtype=bool) if failed is None else np.asarray(failed, dtype=bool)
    return RoundDraw(gamma=gamma, h=h, noise=noise, active_mask=mask, failed=failed_mask)


def draw_rounds(model: ChannelModel, topo: Topology, rng: np.random.Generator, size: int) -> RoundBatch:
    mask = _mask_of(topo)
    n = mask.shape[0]
    _check_dimension(model, n, "topology")

    gamma = rng.random((size, n)) < model.p_vector[None, :]
    rows, cols = np.nonzero(mask)
    h = np.zeros((size, n, n), dtype=complex)
    if rows.size:
        scale = np.sqrt(model.lambda_matrix[rows, cols] / 2.0)
        parts = rng.standard_normal((size, rows.size, 2))
        h[:, rows, cols] = scale[None, :] * (parts[..., 0] + 1j * parts[..., 1])
    noise_parts = rng.standard_normal((size, n, 2))
    noise = np.sqrt(model.sigma2_vector / 2.0)[None, :] * (noise_parts[..., 0] + 1j * noise_parts[..., 1])
    return RoundBatch(gamma=gamma, h=h, noise=noise, active_mask=mask)


def transmit_amplitudes(
    model: ChannelModel,
    x: StateVector | np.ndarray,
    policy: NegativityPolicy = NegativityPolicy.CLAMP,
    *,
    transmitting: np.ndarray | None = None,
    step: int | None = None,
) -> tuple[np.ndarray, float]:
    """Amplitudes sqrt(rho * x_j) after the negativity policy, and the offset the receivers remove.

    ``clamp`` sends sqrt(rho * max(x, 0)). ``abort`` raises if a transmitting agent holds a
    negative state. ``offset-warn`` shifts every state by the same c >= 0 so the smallest
    is zero; receivers subtract c * sum_j abar_ij(k).
    """
    values = _states(x)
    _check_dimension(model, values.shape[0], "state")
    senders = np.ones(values.shape[0], dtype=bool) if transmitting is None else transmitting
    negative = (values < 0.0) & senders

    if not negative.any():
        return np.sqrt(model.rho * np.maximum(values, 0.0)), 0.0

    if policy == NegativityPolicy.ABORT:
        agent = int(np.flatnonzero(negative)[0])
        raise NegativeStateUnderAbortPolicy(agent=agent, value=float(values[agent]), step=step)

    if policy == NegativityPolicy.OFFSET_WARN:
        offset = float(-values.min())
        logger.warning(
            "Negative state transmitted with offset",
            step=step,
            agents=np.flatnonzero(negative).tolist(),
            offset=offset,
        )
        return np.sqrt(model.rho * np.maximum(values + offset, 0.0)), offset

    return np.sqrt(model.rho * np.maximum(values, 0.0)), 0.0


def received_powers(draw: RoundDraw, amplitudes: np.ndarray) -> np.ndarray:
    """|y_i|^2 for every agent at once; y = (Gamma o H) a + n."""
    signal = (draw.pairing * draw.h) @ amplitudes + draw.noise
    return np.abs(signal) ** 2


def batch_received_powers(batch: RoundBatch, amplitudes: np.ndarray) -> np.ndarray:
    signal = np.einsum("bij,j->bi", batch.pairing * batch.h, amplitudes) + batch.noise
    return np.abs(signal) ** 2


def received_power_direct(
    model: ChannelModel,
    draw: RoundDraw,
    x: StateVector | np.ndarray,
    i: int,
    *,
    policy: NegativityPolicy = NegativityPolicy.CLAMP,
) -> float:
    _check_dimension(model, draw.n_agents, "draw")
    amplitudes, _ = transmit_amplitudes(model, x, policy, transmitting=draw.pairing[i] > 0)
    pairing = draw.pairing[i]
    total = complex(draw.noise[i])
    for j in np.flatnonzero(draw.active_mask[i]):
        total += pairing[j] * draw.h[i, j] * amplitudes[j]
    return float(abs(total) ** 2)


def received_power_expanded(
    model: ChannelModel,
    draw: RoundDraw,
    x: StateVector | np.ndarray,
    i: int,
    *,
    policy: NegativityPolicy = NegativityPolicy.CLAMP,
) -> SignalBreakdown:
    """The received power split into its linear, noise, cross-fading and fading-noise parts."""
    _check_dimension(model, draw.n_agents, "draw")
    amplitudes, _ = transmit_amplitudes(model, x, policy, transmitting=draw.pairing[i] > 0)
    pairing = draw.pairing[i]
    h = draw.h[i]
    noise = complex(draw.noise[i])

    contributions = pairing * h * amplitudes
    linear_term = float(np.sum(pairing * np.abs(h) ** 2 * amplitudes**2))
    noise_sq = float(abs(noise) ** 2)
    products = np.real(np.outer(contributions, np.conj(contributions)))
    cross_fading = float(products.sum() - np.trace(products))
    cross_noise = float(2.0 * np.sum(np.real(contributions * np.conj(noise))))

    return SignalBreakdown(
        power=received_power_direct(model, draw, x, i, policy=policy),
        linear_term=linear_term,
        noise_sq=noise_sq,
        cross_fading=cross_fading,
        cross_noise=cross_noise,
    )


def conditional_mean_power(
    model: ChannelModel,
    topo: Topology,
    x: StateVector | np.ndarray,
    i: int,
) -> float:
    """E[|y_i|^2 | x] = sum_j abar_ij x_j + sigma_i^2."""
    values = _states(x)
    weights = expected_weights(model, topo)
    return float(weights[i] @ values + model.sigma2_vector[i])
