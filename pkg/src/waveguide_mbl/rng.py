"""Deterministic random-stream derivation.

A single master seed fans out into independent substreams addressed by
integer paths, so ensemble results do not depend on execution order:

    master seed
      -> (STREAM_GEOMETRY,   realization)             position draws
      -> (STREAM_INITIAL,    realization)             initial-state phases
      -> (STREAM_TRAJECTORY, realization, trajectory) jump trajectories

``substream(seed, *path)`` is the only constructor used in the package.
"""

from __future__ import annotations

import numpy as np

STREAM_GEOMETRY = 0
STREAM_INITIAL = 1
STREAM_TRAJECTORY = 2
STREAM_SCRATCH = 3


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream addressed by ``path`` under ``master_seed``."""
    key = tuple(int(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.default_rng(ss)
