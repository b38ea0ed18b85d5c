from typing import Optional, Sequence, Tuple

import numpy as np

from branchenv.simulate.ct_model import CTModel
from branchenv.simulate.discrete import PARTICLE_CAP, initial_population, run_blocks
from branchenv.simulate.ensemble import Ensemble
from branchenv.simulate.rng import BLOCK_SIZE, block_ranges, block_rng, check_seed
from branchenv.tools.errors import DomainError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.simulate")


def _branch(ct: CTModel, counts: np.ndarray, rows: np.ndarray, types: np.ndarray,
            pieces: np.ndarray, rng: np.random.Generator):
    """Replace one type-j particle in each given row by an offspring draw, grouped by (piece, type)."""
    keys = pieces * ct.d + types
    for key in np.unique(keys):
        members = rows[keys == key]
        piece, j = divmod(int(key), ct.d)
        law = ct.pieces[piece].laws[j]
        atoms = rng.choice(law.size, size=members.size, p=law.probs)
        counts[members, j] -= 1
        counts[members] += law.offspring[atoms]


def _simulate_ct_block(args) -> Tuple[np.ndarray, np.ndarray, None]:
    """
    Event-driven simulation of one block up to time T by thinning.

    Every particle proposes events at the constant rate K0; a proposal by a
    type-j particle at time t is accepted with probability rho_t(j) / K0.
    """
    ct, T, block, seed, initial, particle_cap = args
    rng = block_rng(seed, block)
    K0 = ct.rate_bound
    starts = np.asarray(ct.starts)
    counts = np.tile(initial, (BLOCK_SIZE, 1))
    times = np.zeros(BLOCK_SIZE)
    capped = np.zeros(BLOCK_SIZE, dtype=bool)
    active = counts.sum(axis=1) > 0

    while active.any():
        # Step 1: next proposal time of every active trajectory
        rows = np.flatnonzero(active)
        totals = counts[rows].sum(axis=1)
        proposed = times[rows] + rng.exponential(1.0, size=rows.size) / (K0 * totals)
        done = proposed >= T
        times[rows] = np.minimum(proposed, T)
        active[rows[done]] = False
        rows, totals, proposed = rows[~done], totals[~done], proposed[~done]
        if rows.size == 0:
            break

        # Step 2: pick the proposing particle uniformly and thin
        picks = rng.integers(0, totals)
        types = (np.cumsum(counts[rows], axis=1) > picks[:, None]).argmax(axis=1)
        pieces = np.searchsorted(starts, proposed, side="right") - 1
        accept = rng.random(rows.size) * K0 < ct.rates_table[pieces, types]

        # Step 3: branch the accepted particles
        if accept.any():
            _branch(ct, counts, rows[accept], types[accept], pieces[accept], rng)
            touched = rows[accept]
            sizes = counts[touched].sum(axis=1)
            active[touched[sizes == 0]] = False
            over = touched[sizes > particle_cap]
            capped[over] = True
            active[over] = False
    return counts, capped, None


def simulate_ct(
    ct: CTModel,
    T: float,
    R: int,
    seed: int,
    initial: Optional[Sequence[int]] = None,
    particle_cap: int = PARTICLE_CAP,
    workers: int = 1,
    progress: bool = False,
) -> Ensemble:
    """
    Simulate R independent continuous-time trajectories up to time T.

    Args:
        ct: The continuous-time model.
        T: Final time (> 0).
        R: Number of trajectories (>= 0).
        seed: Master seed.
        initial: Initial population; one type-1 particle by default.
        particle_cap: Trajectories whose population exceeds this are stopped and flagged.
        workers: Worker processes; the ensemble does not depend on this.
        progress: Show a progress bar.

    Returns:
        Ensemble: States at time T.
    """
    if not T > 0:
        raise DomainError(f"final time must be > 0, got {T}")
    seed = check_seed(seed)
    z0 = initial_population(ct.d, initial)
    ranges = block_ranges(R)
    logger.info(f"Simulating '{ct.name}' in continuous time: T={T}, R={R}, seed={seed}")

    tasks = [(ct, float(T), b, seed, z0, particle_cap) for b, _, _ in ranges]
    results = run_blocks(_simulate_ct_block, tasks, workers, progress, "Simulating trajectories")

    terminal = np.zeros((R, ct.d), dtype=np.int64)
    capped = np.zeros(R, dtype=bool)
    for (_, start, stop), (counts, flags, _) in zip(ranges, results):
        terminal[start:stop] = counts[: stop - start]
        capped[start:stop] = flags[: stop - start]

    if capped.any():
        logger.warning(f"{int(capped.sum())} of {R} trajectories hit the particle cap {particle_cap}")
    return Ensemble(
        model_name=ct.name,
        kind="continuous",
        horizon=float(T),
        seed=seed,
        initial=z0,
        terminal=terminal,
        capped=capped,
    )
