from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.linalg import eigh

from overair.config import get_settings
from overair.errors import NotSymmetric
from overair.models.analysis import LaplacianSet, MetricsTrace, RealizedLaplacian
from overair.models.channel import ChannelModel, RoundDraw
from overair.models.topology import PhysicalTopology, TopologySequence

from .channel import Topology, expected_weights
from .graph import active_mask


def expected_laplacian(model: ChannelModel, topo: Topology) -> LaplacianSet:
    """Expected weight matrix and Laplacian on ``topo`` (the base graph or an active G(k))."""
    a_bar = expected_weights(model, topo)
    degrees = a_bar.sum(axis=1)
    return LaplacianSet(a_bar=a_bar, degrees=degrees, L_bar=np.diag(degrees) - a_bar)


def realized_weights(model: ChannelModel, draw: RoundDraw) -> np.ndarray:
    """a_ij(k) = rho * Gamma_ij(k) * |h_ij(k)|^2 on the round's active pairs."""
    return model.rho * draw.pairing * np.abs(draw.h) ** 2


def realized_laplacian(model: ChannelModel, draw: RoundDraw, expected: LaplacianSet | None = None) -> RealizedLaplacian:
    """L(k) = Dbar - A(k) with the expected row sums, so Delta L(k) = A(k) - Abar."""
    expected = expected if expected is not None else expected_laplacian(model, draw.active_mask)
    a = realized_weights(model, draw)
    L = np.diag(expected.degrees) - a
    return RealizedLaplacian(a=a, L=L, delta_L=expected.L_bar - L)


def laplacian_residual(L: np.ndarray) -> float:
    """max(|1^T L|_inf, |L 1|_inf); zero for a valid weighted Laplacian."""
    return float(max(np.abs(L.sum(axis=0)).max(), np.abs(L.sum(axis=1)).max()))


def _check_symmetric(L: np.ndarray, tol: float) -> None:
    asymmetry = float(np.abs(L - L.T).max()) if L.size else 0.0
    if asymmetry > tol:
        raise NotSymmetric(asymmetry)


def fiedler(L: np.ndarray, *, tol: float | None = None) -> float:
    """Second-smallest eigenvalue of a symmetric matrix."""
    matrix = np.asarray(L, dtype=float)
    tol = get_settings().eigen_tol if tol is None else tol
    _check_symmetric(matrix, tol)
    if matrix.shape[0] < 2:
        return 0.0
    eigenvalues = eigh(matrix, eigvals_only=True, subset_by_index=[0, 1])
    return float(eigenvalues[1])


def fiedler_power_iteration(
    L: np.ndarray,
    *,
    max_iter: int = 20_000,
    tol: float = 1e-13,
    rng: np.random.Generator | None = None,
) -> float:
    """lambda_2 of a Laplacian from the Rayleigh quotient on the complement of 1.

    Power iteration on c*I - L restricted to 1-perp converges to c - lambda_2, with c a
    Gershgorin bound on the spectrum.
    """
    matrix = np.asarray(L, dtype=float)
    n = matrix.shape[0]
    if n < 2:
        return 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    shift = float(2.0 * np.abs(np.diag(matrix)).max()) or 1.0
    shifted = shift * np.eye(n) - matrix
    vector = rng.standard_normal(n)
    vector -= vector.mean()
    vector /= np.linalg.norm(vector)
    estimate = float(vector @ matrix @ vector)
    for _ in range(max_iter):
        vector = shifted @ vector
        vector -= vector.mean()
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            return shift
        vector /= norm
        updated = float(vector @ matrix @ vector)
        if abs(updated - estimate) < tol:
            return updated
        estimate = updated
    return estimate


def lyapunov(x: np.ndarray | Sequence[float]) -> float:
    values = np.asarray(x, dtype=float)
    return float(np.sum((values - values.mean()) ** 2))


def window_fiedler(model: ChannelModel, seq: TopologySequence, start: int, L: int | None = None) -> float:
    """lambda_2 of the sum of expected Laplacians over steps start..start+L-1."""
    window = L if L is not None else seq.window
    total = np.zeros((seq.n_agents, seq.n_agents))
    for k in range(start, start + window):
        total += expected_laplacian(model, active_mask(seq, k)).L_bar
    return fiedler(total)


def divergence_ratio(trace: MetricsTrace | Sequence[float]) -> float:
    """max_k V(k) / V(0); above one when the states spread out at some step."""
    values = np.asarray(trace.lyapunov if isinstance(trace, MetricsTrace) else trace, dtype=float)
    if values.size == 0 or values[0] == 0.0:
        return float("inf") if values.size and values.max() > 0.0 else 1.0
    return float(values.max() / values[0])


def base_fiedler(model: ChannelModel, topo: PhysicalTopology) -> float:
    return fiedler(expected_laplacian(model, topo).L_bar)
