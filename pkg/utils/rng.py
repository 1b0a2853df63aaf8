"""
Quench - Random Streams
Deterministic generator streams split from a single run seed.
"""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed: int | np.random.SeedSequence) -> np.random.SeedSequence:
    """Wrap an integer seed; pass sequences through unchanged."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed))


def spawn_sequences(seed: int | np.random.SeedSequence, count: int) -> list[np.random.SeedSequence]:
    """Independent child sequences, stable for a given seed and count order."""
    return as_seed_sequence(seed).spawn(count)

