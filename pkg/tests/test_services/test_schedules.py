from __future__ import annotations

import numpy as np
import pytest

from overair.models.protocol import ExplicitSchedule, PerAgentSchedule, PowerLawSchedule
from overair.services.schedules import (
    alpha_vector,
    d_max,
    power_law_sup,
    schedule_matrix,
    validate_schedule,
)


def test_auto_scale_uses_the_largest_expected_degree(k5_model) -> None:
    assert d_max(k5_model) == pytest.approx(2.0)
    schedule = PowerLawSchedule(p=0.75)
    assert schedule.alpha(0, 2.0) == pytest.approx(0.5)
    assert schedule.alpha(15, 2.0) == pytest.approx(0.5 / 16**0.75)


def test_default_power_law_sits_on_the_contraction_boundary(k5_model) -> None:
    verdict = validate_schedule(PowerLawSchedule(p=0.75), k5_model, "assumption1")
    assert verdict.passed is True
    assert verdict.code == "boundary"
    assert verdict.horizon_limited is False


@pytest.mark.parametrize(
    ("schedule", "code"),
    [
        (PowerLawSchedule(p=0.4), "square_sum_diverges"),
        (PowerLawSchedule(p=1.5), "sum_converges"),
        (PowerLawSchedule(p=0.75, scale=1.0), "stepsize_too_large"),
    ],
)
def test_inadmissible_power_laws_are_named(k5_model, schedule: PowerLawSchedule, code: str) -> None:
    verdict = validate_schedule(schedule, k5_model, "assumption1")
    assert verdict.passed is False
    assert verdict.code == code


def test_harmonic_schedule_is_admissible_for_both_conditions(k5_model) -> None:
    schedule = PowerLawSchedule(p=1.0)
    assert validate_schedule(schedule, k5_model, "assumption1").passed is True
    assert validate_schedule(schedule, k5_model, "assumption3").code == "admissible"


def test_strong_negative_perturbation_breaks_monotonicity(k5_model) -> None:
    verdict = validate_schedule(PowerLawSchedule(p=0.75, perturbation=-0.9), k5_model, "assumption3")
    assert verdict.passed is False
    assert verdict.code == "not_monotone"


def test_mild_negative_perturbation_keeps_monotonicity(k5_model) -> None:
    verdict = validate_schedule(PowerLawSchedule(p=0.75, perturbation=-0.2), k5_model, "assumption3")
    assert verdict.passed is True


def test_perturbed_peak_is_found_past_the_first_step() -> None:
    schedule = PowerLawSchedule(p=0.75, perturbation=-0.9, scale=1.0)
    values = schedule.values(np.arange(10), 1.0)
    assert power_law_sup(schedule, 1.0) == pytest.approx(values.max())


def test_short_explicit_schedule_is_flagged_horizon_limited(k5_model) -> None:
    schedule = ExplicitSchedule(values=[0.1 / (k + 1) for k in range(8)])
    verdict = validate_schedule(schedule, k5_model, "assumption1")
    assert verdict.passed is False
    assert verdict.code == "insufficient_horizon"
    assert verdict.horizon_limited is True


def test_explicit_power_law_values_pass_the_decay_heuristic(k5_model) -> None:
    schedule = ExplicitSchedule(values=[0.5 / (k + 1) ** 0.75 for k in range(400)])
    verdict = validate_schedule(schedule, k5_model, "assumption1")
    assert verdict.passed is True
    assert verdict.horizon_limited is True


def test_increasing_explicit_schedule_fails_monotonicity(k5_model) -> None:
    schedule = ExplicitSchedule(values=[0.1, 0.2, 0.05])
    verdict = validate_schedule(schedule, k5_model, "assumption3")
    assert verdict.code == "not_monotone"


def test_per_agent_perturbations_sharing_the_leading_term(k5_model) -> None:
    schedule = PerAgentSchedule(overrides={0: PowerLawSchedule(p=0.75, perturbation=0.1)})
    assert validate_schedule(schedule, k5_model, "corollary1c").passed is True
    assert validate_schedule(schedule, k5_model, "corollary3c").passed is True


def test_per_agent_exponents_that_differ_are_rejected(k5_model) -> None:
    schedule = PerAgentSchedule(overrides={0: PowerLawSchedule(p=0.9)})
    verdict = validate_schedule(schedule, k5_model, "corollary1c")
    assert verdict.passed is False
    assert verdict.code == "stepsizes_diverge"


def test_per_agent_override_must_itself_be_summable(k5_model) -> None:
    schedule = PerAgentSchedule(overrides={3: PowerLawSchedule(p=0.4)})
    verdict = validate_schedule(schedule, k5_model, "corollary1c")
    assert verdict.code == "square_sum_diverges"
    assert "agent 3" in verdict.message


def test_per_agent_contraction_uses_each_agents_degree(k5_model) -> None:
    schedule = PerAgentSchedule(overrides={1: PowerLawSchedule(p=0.75, perturbation=0.1)})
    verdict = validate_schedule(schedule, k5_model, "assumption1")
    assert verdict.code == "stepsize_too_large"
    assert "agent 1" in verdict.message


def test_homogeneous_schedule_passes_the_corollaries_trivially(k5_model) -> None:
    verdict = validate_schedule(PowerLawSchedule(), k5_model, "corollary3c")
    assert verdict.code == "homogeneous"


def test_alpha_vector_and_matrix_shapes() -> None:
    schedule = PerAgentSchedule(overrides={2: PowerLawSchedule(p=0.75, perturbation=0.5)})
    alphas = alpha_vector(schedule, 0, 4, 2.0)
    assert alphas[0] == pytest.approx(0.5)
    assert alphas[2] == pytest.approx(0.75)
    matrix = schedule_matrix(schedule, 6, 4, 2.0)
    assert matrix.shape == (4, 6)
    assert matrix[:, 0] == pytest.approx(alphas)
