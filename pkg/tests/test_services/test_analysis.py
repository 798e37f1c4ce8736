from __future__ import annotations

import numpy as np
import pytest

from overair.errors import NotSymmetric
from overair.models.analysis import MetricsTrace
from overair.models.channel import ChannelModel
from overair.models.topology import PhysicalTopology, TopologySequence
from overair.services.analysis import (
    base_fiedler,
    divergence_ratio,
    expected_laplacian,
    fiedler,
    fiedler_power_iteration,
    laplacian_residual,
    lyapunov,
    realized_laplacian,
    realized_weights,
    window_fiedler,
)
from overair.services.channel import draw_round
from overair.services.graph import complete_graph, path_graph, ring_graph
from simulator.generators import random_connected_graph


def _unweighted(topo: PhysicalTopology) -> np.ndarray:
    adjacency = topo.adjacency.astype(float)
    return np.diag(adjacency.sum(axis=1)) - adjacency


def test_expected_laplacian_on_complete_graph(k5_model, k5) -> None:
    expected = expected_laplacian(k5_model, k5)
    assert expected.a_bar[0, 1] == pytest.approx(0.5)
    assert expected.degrees == pytest.approx(np.full(5, 2.0))
    assert expected.d_max == pytest.approx(2.0)
    assert laplacian_residual(expected.L_bar) < 1e-12


def test_realized_laplacian_deviation_is_weights_minus_expectation(k5_model, k5, rng) -> None:
    draw = draw_round(k5_model, k5, rng)
    realized = realized_laplacian(k5_model, draw)
    a_bar = expected_laplacian(k5_model, k5).a_bar
    assert np.allclose(realized.delta_L, realized_weights(k5_model, draw) - a_bar)


@pytest.mark.parametrize(
    ("matrix", "expected"),
    [
        (np.array([[0.5, -0.5], [-0.5, 0.5]]), 1.0),
        (_unweighted(path_graph(3)), 1.0),
        (_unweighted(complete_graph(5)), 5.0),
    ],
)
def test_fiedler_known_values(matrix: np.ndarray, expected: float) -> None:
    assert fiedler(matrix) == pytest.approx(expected, abs=1e-10)


def test_expected_laplacian_scales_the_spectrum(k5_model, k5) -> None:
    assert base_fiedler(k5_model, k5) == pytest.approx(2.5, abs=1e-10)


def test_fiedler_rejects_asymmetric_input() -> None:
    with pytest.raises(NotSymmetric):
        fiedler(np.array([[1.0, -1.0], [0.0, 0.0]]))


def test_fiedler_matches_full_eigendecomposition() -> None:
    rng = np.random.default_rng(17)
    for _ in range(500):
        n = int(rng.integers(2, 11))
        b = rng.standard_normal((n, n))
        product = b @ b.T
        matrix = (product + product.T) / 2.0
        expected = np.sort(np.linalg.eigvalsh(matrix))[1]
        assert fiedler(matrix) == pytest.approx(expected, abs=1e-8 * max(1.0, abs(expected)))


@pytest.mark.parametrize(
    "topo",
    [path_graph(3), ring_graph(6), complete_graph(5)],
)
def test_power_iteration_agrees_with_dense_solver(topo: PhysicalTopology) -> None:
    L = 0.5 * _unweighted(topo)
    assert fiedler_power_iteration(L) == pytest.approx(fiedler(L), abs=1e-8)


def test_adding_an_edge_never_lowers_connectivity() -> None:
    rng = np.random.default_rng(23)
    for _ in range(50):
        n = int(rng.integers(3, 12))
        topo = random_connected_graph(n, 0.3, rng)
        missing = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in topo.edges]
        if not missing:
            continue
        extra = missing[int(rng.integers(len(missing)))]
        denser = PhysicalTopology(n_agents=n, edges=topo.edges | {extra})
        model = ChannelModel.uniform(n)
        assert base_fiedler(model, denser) >= base_fiedler(model, topo) - 1e-9
        assert base_fiedler(model, topo) > 0.0


def test_window_fiedler_of_static_window_scales_with_length(k5_model, k5) -> None:
    seq = TopologySequence.static(k5, window=3)
    assert window_fiedler(k5_model, seq, 0) == pytest.approx(3.0 * base_fiedler(k5_model, k5), abs=1e-9)


def test_lyapunov_examples() -> None:
    assert lyapunov([0.0, 2.0]) == pytest.approx(2.0)
    assert lyapunov([1.0, 2.0, 3.0, 4.0, 5.0]) == pytest.approx(10.0)
    assert lyapunov([7.0, 7.0, 7.0]) == 0.0


def test_divergence_ratio_uses_the_largest_excursion() -> None:
    assert divergence_ratio([10.0, 5.0, 20.0, 1.0]) == pytest.approx(2.0)
    assert divergence_ratio([10.0, 5.0]) == pytest.approx(1.0)
    assert divergence_ratio([0.0, 0.0]) == 1.0
    assert divergence_ratio([0.0, 1.0]) == float("inf")


def test_metrics_trace_recovers_mse_from_lyapunov() -> None:
    trace = MetricsTrace(initial_average=3.0, keep_mse=True)
    x = np.array([1.0, 2.0, 6.0])
    trace.record(0, x, events=0)
    assert trace.lyapunov[0] == pytest.approx(14.0)
    assert trace.mse_curve()[0] == pytest.approx(np.mean((x - 3.0) ** 2))
    assert trace.mse[0] == pytest.approx((x - 3.0) ** 2)
