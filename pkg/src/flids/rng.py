"""Deterministic named RNG substreams.

Every random draw comes from a substream derived from the scenario seed and a
purpose tag. Stages draw only from their own stream, so two runs sharing a
seed replay each other's draws up to their first behavioural difference; in
particular an attack run's dormant phase replays the same-seed benign run
exactly.
"""

from __future__ import annotations

import numpy as np

TOPOLOGY = 0
MOBILITY = 1
TRAFFIC = 2
ATTACK = 3
MODEL_INIT = 4
TRAIN = 5
SPLIT = 6
FED = 7


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for stream `path` of the given scenario/experiment seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))
