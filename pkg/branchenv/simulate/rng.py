"""
Counter-based random streams for ensembles.

Trajectories are simulated in fixed blocks of BLOCK_SIZE. Block b draws from a
Philox stream keyed by (seed, b) and is always simulated in full, so the
result of trajectory r depends only on (seed, r): neither the number of
requested trajectories nor the number of workers changes it.
"""

from typing import List, Tuple

import numpy as np

from branchenv.tools.errors import DomainError

BLOCK_SIZE = 4096


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Generator for one block of trajectories, keyed by (seed, block)."""
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(sequence))


def block_ranges(R: int, block_size: int = BLOCK_SIZE) -> List[Tuple[int, int, int]]:
    """(block index, first trajectory, one past last trajectory) covering 0..R-1."""
    if R < 0:
        raise DomainError(f"replication count must be >= 0, got {R}")
    return [
        (b, start, min(start + block_size, R))
        for b, start in enumerate(range(0, R, block_size))
    ]
