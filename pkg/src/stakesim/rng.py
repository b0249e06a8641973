"""Deterministic random streams for parallel Monte Carlo.

Every trajectory (and every sweep cell) gets its own counter-based Philox
generator keyed by (master_seed, *indices).  Streams are therefore
independent of execution order and thread count, which is what makes
byte-identical reruns possible.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *indices)."""
    seq = np.random.SeedSequence((int(master_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, indices)))
    return np.random.Generator(np.random.Philox(seq))


def cell_seed_key(master_seed: int, axis1_index: int, axis2_index: int, trajectory: int) -> tuple[int, ...]:
    """Key identifying one trajectory of one sweep cell."""
    return (int(master_seed), int(axis1_index), int(axis2_index), int(trajectory))
