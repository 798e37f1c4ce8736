from .analysis import expected_laplacian, fiedler, lyapunov
from .bounds import bound_constants
from .channel import draw_round, received_powers
from .graph import certify_sequence, generate_sampled_sequence, is_jointly_connected
from .harness import check_connectivity, compare, estimate_moments, run, validate
from .protocol import step, step_baseline, step_heterogeneous
from .schedules import validate_schedule

__all__ = [
    "bound_constants",
    "certify_sequence",
    "check_connectivity",
    "compare",
    "draw_round",
    "estimate_moments",
    "expected_laplacian",
    "fiedler",
    "generate_sampled_sequence",
    "is_jointly_connected",
    "lyapunov",
    "run",
    "step",
    "step_baseline",
    "step_heterogeneous",
    "validate",
    "validate_schedule",
]
