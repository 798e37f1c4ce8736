from __future__ import annotations

import numpy as np
import pytest

from overair.errors import DimensionMismatch, NegativeStateUnderAbortPolicy
from overair.models.channel import ChannelModel, parse_power
from overair.models.protocol import NegativityPolicy
from overair.services.channel import (
    batch_received_powers,
    conditional_mean_power,
    draw_round,
    draw_rounds,
    expected_weights,
    received_power_direct,
    received_power_expanded,
    received_powers,
    transmit_amplitudes,
)
from overair.services.graph import complete_graph, ring_graph


def test_parse_power_accepts_numbers_and_decibels() -> None:
    assert parse_power(0.25) == 0.25
    assert parse_power("0dB") == pytest.approx(1.0)
    assert parse_power("20dB") == pytest.approx(100.0)
    assert parse_power("-60dB") == pytest.approx(1e-6)
    assert parse_power("0.5") == 0.5


def test_model_broadcasts_scalars_and_zeroes_the_diagonal() -> None:
    model = ChannelModel.model_validate(
        {"n_agents": 3, "p": [0.2, 0.5, 0.7], "sigma2": "0dB", "lambda": {"default": 2.0, "overrides": [[0, 2, 0.5]]}}
    )
    assert model.sigma2 == pytest.approx((1.0, 1.0, 1.0))
    assert np.all(np.diag(model.lambda_matrix) == 0.0)
    assert model.lambda_matrix[0, 2] == model.lambda_matrix[2, 0] == 0.5
    assert model.lambda_matrix[0, 1] == 2.0
    assert model.pair_probability[0, 1] == pytest.approx(0.2 * 0.5 + 0.5 * 0.8)


def test_models_compare_by_fields_after_reading_cached_arrays() -> None:
    used = ChannelModel.uniform(4, p=0.3, sigma2=0.1, fading=2.0)
    fresh = ChannelModel.uniform(4, p=0.3, sigma2=0.1, fading=2.0)
    assert used.pair_probability.shape == used.lambda_matrix.shape == (4, 4)
    assert used.sigma2_vector.shape == (4,)
    assert used == fresh
    assert hash(used) == hash(fresh)
    assert used != ChannelModel.uniform(4, p=0.3, sigma2=0.2, fading=2.0)


@pytest.mark.parametrize(
    "overrides",
    [
        {"p": 1.0},
        {"p": 0.0},
        {"sigma2": -1.0},
        {"lambda": [[0.0, 1.0], [2.0, 0.0]]},
    ],
)
def test_model_rejects_invalid_parameters(overrides: dict) -> None:
    with pytest.raises(ValueError):
        ChannelModel.model_validate({"n_agents": 2, **overrides})


def test_expected_weights_on_complete_graph(k5_model, k5) -> None:
    weights = expected_weights(k5_model, k5)
    off_diagonal = ~np.eye(5, dtype=bool)
    assert np.allclose(weights[off_diagonal], 0.5)
    assert np.all(np.diag(weights) == 0.0)


def test_conditional_mean_power_adds_noise_floor(k5_model, k5) -> None:
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert conditional_mean_power(k5_model, k5, x, 0) == pytest.approx(7.1)


def test_draw_round_follows_the_documented_stream_layout() -> None:
    model = ChannelModel.uniform(4, p=0.3, sigma2=0.2, fading=1.5)
    topo = ring_graph(4)
    draw = draw_round(model, topo, np.random.default_rng(42))

    replay = np.random.default_rng(42)
    gamma = replay.random(4) < 0.3
    rows, cols = np.nonzero(topo.adjacency)
    parts = replay.standard_normal((rows.size, 2))
    noise_parts = replay.standard_normal((4, 2))

    assert np.array_equal(draw.gamma, gamma)
    expected_h = np.sqrt(1.5 / 2.0) * (parts[:, 0] + 1j * parts[:, 1])
    assert np.array_equal(draw.h[rows, cols], expected_h)
    assert np.array_equal(draw.noise, np.sqrt(0.2 / 2.0) * (noise_parts[:, 0] + 1j * noise_parts[:, 1]))
    assert np.all(draw.h[~topo.adjacency] == 0.0)


def test_full_duplex_draw_skips_slot_bits() -> None:
    model = ChannelModel.uniform(3, sigma2=0.1)
    topo = complete_graph(3)
    duplex = draw_round(model, topo, np.random.default_rng(1), half_duplex=False)

    replay = np.random.default_rng(1)
    parts = replay.standard_normal((6, 2))
    assert not duplex.gamma.any()
    rows, cols = np.nonzero(topo.adjacency)
    assert np.array_equal(duplex.h[rows, cols], np.sqrt(0.5) * (parts[:, 0] + 1j * parts[:, 1]))


def test_pairing_is_one_only_when_exactly_one_end_transmits(k5_model, k5, rng) -> None:
    draw = draw_round(k5_model, k5, rng)
    g = draw.gamma
    for i in range(5):
        for j in range(5):
            expected = float(i != j and g[i] != g[j])
            assert draw.pairing[i, j] == expected


def test_direct_vectorized_and_expanded_powers_agree(k5_model, k5) -> None:
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    rng = np.random.default_rng(9)
    for _ in range(50):
        draw = draw_round(k5_model, k5, rng)
        amplitudes, _ = transmit_amplitudes(k5_model, x)
        vectorized = received_powers(draw, amplitudes)
        for i in range(5):
            direct = received_power_direct(k5_model, draw, x, i)
            breakdown = received_power_expanded(k5_model, draw, x, i)
            assert vectorized[i] == pytest.approx(direct, rel=1e-9, abs=1e-12)
            assert breakdown.total() == pytest.approx(direct, rel=1e-9, abs=1e-12)


@pytest.mark.slow
def test_expanded_power_identity_over_many_draws(k5_model, k5) -> None:
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    rng = np.random.default_rng(10)
    for _ in range(10_000):
        draw = draw_round(k5_model, k5, rng)
        for i in range(5):
            direct = received_power_direct(k5_model, draw, x, i)
            assert received_power_expanded(k5_model, draw, x, i).total() == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_batch_powers_match_single_rounds(k5_model, k5) -> None:
    x = np.linspace(0.0, 4.0, 5)
    batch = draw_rounds(k5_model, k5, np.random.default_rng(3), 20)
    amplitudes, _ = transmit_amplitudes(k5_model, x)
    powers = batch_received_powers(batch, amplitudes)
    assert powers.shape == (20, 5)
    for b in range(20):
        signal = (batch.pairing[b] * batch.h[b]) @ amplitudes + batch.noise[b]
        assert np.allclose(powers[b], np.abs(signal) ** 2)


def test_no_transmitters_leaves_only_noise(k5_model, k5, rng) -> None:
    draw = draw_round(k5_model, k5, rng)
    powers = received_powers(draw, np.zeros(5))
    assert np.allclose(powers, np.abs(draw.noise) ** 2)


def test_clamp_policy_silences_negative_states(k5_model) -> None:
    amplitudes, offset = transmit_amplitudes(k5_model, np.array([-1.0, 4.0, 0.0, 1.0, 9.0]))
    assert offset == 0.0
    assert np.allclose(amplitudes, [0.0, 2.0, 0.0, 1.0, 3.0])


def test_abort_policy_raises_for_negative_transmitter(k5_model) -> None:
    transmitting = np.array([False, True, True, True, True])
    x = np.array([-1.0, 4.0, 0.0, 1.0, 9.0])
    amplitudes, _ = transmit_amplitudes(k5_model, x, NegativityPolicy.ABORT, transmitting=transmitting)
    assert amplitudes[0] == 0.0

    with pytest.raises(NegativeStateUnderAbortPolicy) as exc_info:
        transmit_amplitudes(k5_model, x, NegativityPolicy.ABORT, step=3)
    assert exc_info.value.agent == 0
    assert exc_info.value.step == 3


def test_offset_policy_shifts_every_state(k5_model) -> None:
    amplitudes, offset = transmit_amplitudes(k5_model, np.array([-1.0, 3.0, 0.0, 1.0, 8.0]), NegativityPolicy.OFFSET_WARN)
    assert offset == 1.0
    assert np.allclose(amplitudes, [0.0, 2.0, 1.0, np.sqrt(2.0), 3.0])


def test_dimension_mismatch_is_reported(k5_model) -> None:
    with pytest.raises(DimensionMismatch) as exc_info:
        draw_round(k5_model, ring_graph(4), np.random.default_rng(0))
    assert exc_info.value.expected == 5
    assert exc_info.value.got == 4

    with pytest.raises(DimensionMismatch):
        transmit_amplitudes(k5_model, np.ones(3))
