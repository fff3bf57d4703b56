"""Reproducible random-stream derivation.

Episode ``i`` of a run with master seed ``s`` always draws from
``SeedSequence(entropy=s, spawn_key=(i,))``. This derivation is part of
the external contract: policy comparisons pair episodes by index so that
both policies see common random numbers.
"""
from __future__ import annotations

import numpy as np


def episode_seed(master_seed: int, episode_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(episode_index),))


def episode_rng(master_seed: int, episode_index: int) -> np.random.Generator:
    return np.random.default_rng(episode_seed(master_seed, episode_index))
