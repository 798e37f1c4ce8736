"""Per-trial random streams.

Every trial owns a counter-based Philox stream keyed by (seed, trial index), so adding
trials or reordering their execution never changes the draws of an existing trial.
"""

from __future__ import annotations

import numpy as np


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    if trial < 0:
        raise ValueError(f"trial index must be nonnegative, got {trial}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def topology_rng(seed: int) -> np.random.Generator:
    """Stream for the sampled topology sequence, shared by every trial of a scenario."""
    # spawn_key keeps it apart from every (seed, trial) stream
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0,))))
