from __future__ import annotations

import numpy as np
import pytest

from overair.models.channel import ChannelModel
from overair.models.scenario import MomentsSpec
from overair.services.graph import complete_graph
from overair.services.harness import estimate_moments
from overair.services.moments import MIN_DRAWS, estimate_conditional_moments
from overair.services.streams import topology_rng, trial_rng


@pytest.fixture(scope="module")
def k5_report():
    model = ChannelModel.uniform(5, p=0.5, sigma2=0.1, fading=1.0)
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    return estimate_conditional_moments(
        model, complete_graph(5), x, 20_000, np.random.default_rng(20240101), gate_se=5.0
    )


def test_round_statistics_match_their_closed_forms(k5_report) -> None:
    assert k5_report.draws == 20_000
    failed = [c.name for c in k5_report.checks if c.reference == "convention-consistent" and not c.passed]
    assert failed == []
    assert k5_report.passed is True


def test_mean_received_power_is_linear_in_the_states(k5_report) -> None:
    check = k5_report.get("power_mean[0]")
    assert check.expected == pytest.approx(7.1)
    assert check.empirical == pytest.approx(7.1, rel=0.05)


def test_literal_noise_fourth_moment_is_reported_but_not_gating(k5_report) -> None:
    literal = [
        c for c in k5_report.checks if c.name == "noise_sq_var[0]" and c.reference == "paper-literal"
    ]
    assert len(literal) == 1
    assert literal[0].expected == pytest.approx(7.0 * 0.1**2)
    assert literal[0].passed is False
    assert k5_report.get("noise_sq_var[0]").expected == pytest.approx(0.1**2)


def test_laplacian_deviation_energy_matches_the_consistent_constant(k5_report) -> None:
    consistent = k5_report.get("delta_L_frobenius")
    assert consistent.expected == pytest.approx(15.0)
    assert consistent.passed is True


def test_too_few_draws_are_rejected(k5_model, k5) -> None:
    with pytest.raises(ValueError):
        estimate_conditional_moments(k5_model, k5, np.ones(5), MIN_DRAWS - 1, np.random.default_rng(0))


def test_moments_spec_runs_from_its_file(fixtures_dir) -> None:
    spec = MomentsSpec.load(fixtures_dir / "models" / "k5_moments.json")
    assert spec.channel.n_agents == 5
    report = estimate_moments(spec, MIN_DRAWS, seed=1)
    assert report.draws == MIN_DRAWS
    assert len(report.checks) > 0


def test_trial_streams_are_keyed_by_seed_and_index() -> None:
    first = trial_rng(7, 3).standard_normal(4)
    assert np.array_equal(first, trial_rng(7, 3).standard_normal(4))
    assert not np.array_equal(first, trial_rng(7, 4).standard_normal(4))
    assert not np.array_equal(first, trial_rng(8, 3).standard_normal(4))
    assert not np.array_equal(topology_rng(7).standard_normal(4), trial_rng(7, 0).standard_normal(4))
    with pytest.raises(ValueError):
        trial_rng(7, -1)


@pytest.mark.slow
def test_round_statistics_at_full_scale() -> None:
    model = ChannelModel.uniform(5, p=0.5, sigma2=0.1, fading=1.0)
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    report = estimate_conditional_moments(
        model, complete_graph(5), x, 1_000_000, np.random.default_rng(20240101), gate_se=3.0
    )
    assert report.gate_se == 3.0

    for i in range(5):
        power = report.get(f"power_mean[{i}]")
        assert power.empirical == pytest.approx(power.expected, rel=0.01)
        assert report.get(f"v_mean[{i}]").passed
    for i in range(5):
        for j in range(5):
            if i != j:
                assert report.get(f"delta_L_mean[{i},{j}]").passed
                assert report.get(f"gamma_sq[{i},{j}]").passed
    products = [c for c in report.checks if c.name.startswith("fading_product")]
    assert products
    for check in products:
        assert check.empirical == pytest.approx(check.expected, rel=0.02)
