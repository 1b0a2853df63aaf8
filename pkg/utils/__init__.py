"""
Quench - Utilities Package
"""

from utils.rng import as_seed_sequence, spawn_sequences

__all__ = [
    "as_seed_sequence",
    "spawn_sequences",
]
