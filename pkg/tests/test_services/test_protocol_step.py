from __future__ import annotations

import numpy as np
import pytest

from overair.errors import DivisionNearZero, InadmissibleSchedule, NegativeStateUnderAbortPolicy
from overair.models.channel import ChannelModel, RoundDraw
from overair.models.protocol import (
    ExplicitSchedule,
    NegativityPolicy,
    PerAgentSchedule,
    PowerLawSchedule,
    StateVector,
)
from overair.models.topology import TopologyEvent, TopologySequence
from overair.services.analysis import expected_laplacian
from overair.services.graph import complete_graph, ring_graph
from overair.services.protocol import apply_round, step, step_baseline, step_heterogeneous


def _state(values: list[float]) -> StateVector:
    return StateVector.initial(values, x_min=min(values), x_max=max(values))


def _two_agent_draw() -> RoundDraw:
    return RoundDraw(
        gamma=np.array([True, False]),
        h=np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
        noise=np.zeros(2, dtype=complex),
        active_mask=np.array([[False, True], [True, False]]),
        failed=np.zeros(2, dtype=bool),
    )


def test_two_agent_round_by_hand() -> None:
    model = ChannelModel.uniform(2, p=0.5, sigma2=0.0, fading=1.0)
    state, _, noise = apply_round(model, np.array([1.0, 1.0]), _state([0.0, 4.0]), _two_agent_draw())

    # agent 0 hears |1 * 1 * sqrt(4)|^2 = 4 and starts from (1 - 0.5) * 0
    assert state.x[0] == pytest.approx(4.0)
    assert state.x[1] == pytest.approx(2.0)
    assert state.k == 1
    assert noise.w == pytest.approx(noise.v + noise.delta_L_x)
    assert state.convexity_violations == 0


def test_update_matches_compact_form(k5_model, k5, rng) -> None:
    seq = TopologySequence.static(k5)
    schedule = PowerLawSchedule()
    state = _state([1.0, 2.0, 3.0, 4.0, 5.0])
    L_bar = expected_laplacian(k5_model, k5).L_bar
    for _ in range(200):
        alpha = schedule.alpha(state.k, 2.0)
        nxt, _, noise = step(k5_model, seq, schedule, state, rng)
        predicted = state.x - alpha * (L_bar @ state.x) + alpha * noise.w
        assert np.allclose(nxt.x, predicted, rtol=0.0, atol=1e-9 * max(1.0, np.abs(state.x).max()))
        state = nxt


def test_shared_per_agent_schedule_is_bit_identical(k5_model, k5) -> None:
    seq = TopologySequence.static(k5)
    shared_state = heterogeneous_state = _state([1.0, 2.0, 3.0, 4.0, 5.0])
    shared_rng = np.random.default_rng(5)
    heterogeneous_rng = np.random.default_rng(5)
    for _ in range(50):
        shared_state, _, _ = step(k5_model, seq, PowerLawSchedule(), shared_state, shared_rng)
        heterogeneous_state, _, _ = step_heterogeneous(
            k5_model, seq, PerAgentSchedule(), heterogeneous_state, heterogeneous_rng
        )
    assert np.array_equal(shared_state.x, heterogeneous_state.x)


def test_step_refuses_per_agent_schedule(k5_model, k5, rng) -> None:
    with pytest.raises(TypeError):
        step(k5_model, TopologySequence.static(k5), PerAgentSchedule(), _state([1.0] * 5), rng)


def test_failed_agent_keeps_its_state(rng) -> None:
    model = ChannelModel.uniform(5, sigma2=0.1)
    seq = TopologySequence(
        base=ring_graph(5), window=1, events=(TopologyEvent(k=0, failed_nodes=frozenset({2})),)
    )
    state = _state([1.0, 2.0, 3.0, 4.0, 5.0])
    nxt, _, noise = step(model, seq, PowerLawSchedule(), state, rng)
    assert nxt.x[2] == 3.0
    assert noise.v[2] == 0.0


def test_silent_noiseless_channel_leaves_states_unchanged(rng) -> None:
    model = ChannelModel.uniform(5, sigma2=0.0, fading=0.0)
    state = _state([1.0, 2.0, 3.0, 4.0, 5.0])
    nxt, _, _ = step(model, TopologySequence.static(complete_graph(5)), PowerLawSchedule(), state, rng)
    assert np.array_equal(nxt.x, state.x)


def test_oversized_stepsize_is_rejected(k5_model, k5, rng) -> None:
    schedule = ExplicitSchedule(values=[5.0, 5.0])
    with pytest.raises(InadmissibleSchedule) as exc_info:
        step(k5_model, TopologySequence.static(k5), schedule, _state([1.0] * 5), rng)
    assert exc_info.value.verdict.code == "stepsize_too_large"


def test_explicit_schedule_cannot_run_past_its_end(k5_model, k5, rng) -> None:
    seq = TopologySequence.static(k5)
    schedule = ExplicitSchedule(values=[0.1])
    state, _, _ = step(k5_model, seq, schedule, _state([1.0] * 5), rng)
    with pytest.raises(InadmissibleSchedule) as exc_info:
        step(k5_model, seq, schedule, state, rng)
    assert exc_info.value.verdict.code == "horizon_exceeded"


def test_abort_policy_stops_on_negative_transmitter(k5_model) -> None:
    draw = RoundDraw(
        gamma=np.array([True, False, True, False, True]),
        h=np.zeros((5, 5), dtype=complex),
        noise=np.zeros(5, dtype=complex),
        active_mask=complete_graph(5).adjacency,
        failed=np.zeros(5, dtype=bool),
    )
    state = StateVector(x=np.array([-1.0, 2.0, 3.0, 4.0, 5.0]))
    with pytest.raises(NegativeStateUnderAbortPolicy) as exc_info:
        apply_round(k5_model, np.full(5, 0.1), state, draw, NegativityPolicy.ABORT)
    assert exc_info.value.agent == 0


def test_clamp_policy_counts_negative_states(k5_model) -> None:
    draw = RoundDraw(
        gamma=np.ones(5, dtype=bool),
        h=np.zeros((5, 5), dtype=complex),
        noise=np.zeros(5, dtype=complex),
        active_mask=complete_graph(5).adjacency,
        failed=np.zeros(5, dtype=bool),
    )
    # sigma^2 = 0.1 is subtracted from an empty received power
    state = StateVector(x=np.zeros(5))
    nxt, _, _ = apply_round(k5_model, np.full(5, 0.1), state, draw, NegativityPolicy.CLAMP)
    assert np.allclose(nxt.x, -0.01)
    assert nxt.negativity_events == 5


def test_baseline_keeps_consensus_without_noise(rng) -> None:
    model = ChannelModel.uniform(5, sigma2=0.0)
    state = _state([3.0] * 5)
    nxt = step_baseline(model, complete_graph(5), state, rng)
    assert nxt.x == pytest.approx(np.full(5, 3.0), rel=1e-9)
    assert nxt.guard_events == 0


def test_baseline_with_single_transmitter_copies_its_state() -> None:
    model = ChannelModel.uniform(2, sigma2=0.0)
    nxt = step_baseline(model, complete_graph(2), _state([2.0, 7.0]), np.random.default_rng(4))
    assert nxt.x == pytest.approx([7.0, 2.0], rel=1e-9)


def test_baseline_guard_holds_state_or_raises(rng) -> None:
    model = ChannelModel.uniform(5, sigma2=0.0)
    state = _state([1.0, 2.0, 3.0, 4.0, 5.0])
    held = step_baseline(model, complete_graph(5), state, rng, guard=1e300)
    assert np.array_equal(held.x, state.x)
    assert held.guard_events == 5

    with pytest.raises(DivisionNearZero):
        step_baseline(model, complete_graph(5), state, rng, guard=1e300, strict=True)


def test_baseline_abort_policy_rejects_negative_state(rng) -> None:
    model = ChannelModel.uniform(3, sigma2=0.0)
    state = StateVector(x=np.array([1.0, -2.0, 3.0]))
    with pytest.raises(NegativeStateUnderAbortPolicy):
        step_baseline(model, complete_graph(3), state, rng, policy="abort")


def _second_slot_draw(fading: float = 1.0) -> RoundDraw:
    draw = _two_agent_draw()
    return RoundDraw(
        gamma=draw.gamma,
        h=draw.h * fading,
        noise=draw.noise,
        active_mask=draw.active_mask,
        failed=draw.failed,
    )


def test_abort_policy_covers_second_slot_transmitter() -> None:
    # agent 1 has gamma = 0 and still answers agent 0 in the second slot
    model = ChannelModel.uniform(2, p=0.5, sigma2=0.0, fading=1.0)
    state = StateVector(x=np.array([4.0, -1.0]))
    with pytest.raises(NegativeStateUnderAbortPolicy) as exc_info:
        apply_round(model, np.full(2, 0.5), state, _second_slot_draw(), NegativityPolicy.ABORT)
    assert exc_info.value.agent == 1


def test_offset_policy_shifts_for_second_slot_transmitter() -> None:
    model = ChannelModel.uniform(2, p=0.5, sigma2=0.0, fading=1.0)
    state = StateVector(x=np.array([4.0, -1.0]))
    nxt, _, _ = apply_round(model, np.full(2, 0.5), state, _second_slot_draw(), NegativityPolicy.OFFSET_WARN)

    # offset c = 1, abar = 0.5: agent 0 hears 0 and removes 0.5; agent 1 hears 5 and removes 0.5
    assert nxt.x[0] == pytest.approx(0.75 * 4.0 + 0.5 * (0.0 - 0.5))
    assert nxt.x[1] == pytest.approx(0.75 * -1.0 + 0.5 * (5.0 - 0.5))


def test_realized_weights_above_one_over_alpha_are_counted() -> None:
    model = ChannelModel.uniform(2, p=0.5, sigma2=0.0, fading=1.0)
    # |h|^2 = 4 gives a_ij = 4 while alpha * abar = 0.5 passes the expected check
    nxt, _, _ = apply_round(model, np.ones(2), _state([1.0, 2.0]), _second_slot_draw(fading=2.0))
    assert nxt.convexity_violations == 2

    again, _, _ = apply_round(model, np.full(2, 0.1), nxt, _second_slot_draw(fading=2.0))
    assert again.convexity_violations == 2
