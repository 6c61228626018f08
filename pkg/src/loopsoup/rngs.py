"""Deterministic stream derivation from a master seed.

Every random procedure takes its generator from ``derive_rng(master, *path)``
with a fixed integer path, so results do not depend on scheduling or on how
many workers participate.
"""

from __future__ import annotations

import numpy as np

# Stream tags (first path element) per subsystem.
STREAM_SOUP = 1
STREAM_FRACTAL = 2
STREAM_CAPACITY = 3
STREAM_EXPERIMENT = 4


def derive_seedseq(master_seed: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, path)])


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seedseq(master_seed, *path))
