from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
from rich.progress import Progress

from branchenv.model.branching_model import BranchingModel
from branchenv.simulate.ensemble import Ensemble, PopulationState
from branchenv.simulate.rng import BLOCK_SIZE, block_ranges, block_rng, check_seed
from branchenv.tools.errors import DomainError, ParticleCapError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.simulate")

PARTICLE_CAP = 10_000_000


def initial_population(d: int, initial: Optional[Sequence[int]]) -> np.ndarray:
    """Initial type counts, one type-1 particle by default."""
    if initial is None:
        return np.eye(d, dtype=np.int64)[0]
    z0 = np.asarray(initial)
    if z0.shape != (d,) or np.any(z0 < 0) or np.any(z0 != np.round(z0)):
        raise DomainError(f"initial population must be {d} nonnegative integers, got {list(initial)}")
    return z0.astype(np.int64)


def step_counts(
    model: BranchingModel, n: int, counts: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """
    Advance stacked (B, d) populations by one generation.

    Parents are replaced type by type: all type-1 parents of every row draw
    first, then type 2, and so on. Rows with no parents of a type draw nothing.
    """
    children = np.zeros_like(counts)
    for j, law in enumerate(model.laws_at(n)):
        parents = counts[:, j]
        rows = np.flatnonzero(parents > 0)
        if rows.size == 0:
            continue
        atoms = rng.multinomial(parents[rows], law.probs)
        children[rows] += atoms @ law.offspring
    return children


def step_population(
    model: BranchingModel,
    n: int,
    pop: PopulationState,
    rng: np.random.Generator,
    particle_cap: int = PARTICLE_CAP,
) -> PopulationState:
    """
    Replace every particle of generation n by an independent offspring draw.

    Args:
        model: The branching model.
        n: Generation of the parents.
        pop: Current population.
        rng: Random stream of the trajectory.
        particle_cap: Largest population that may be stepped.

    Returns:
        PopulationState: The next generation.
    """
    if len(pop.counts) != model.d:
        raise DomainError(f"population has {len(pop.counts)} types, model has {model.d}")
    if pop.total > particle_cap:
        raise ParticleCapError(
            f"population {pop.total} exceeds the particle cap {particle_cap}", cap=particle_cap
        )
    if pop.extinct:
        return pop
    return PopulationState.of(step_counts(model, n, pop.as_array()[None, :], rng)[0])


def _simulate_block(args) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Simulate one full block of trajectories; top-level so worker processes can run it."""
    model, n, block, seed, initial, particle_cap, keep_traces = args
    rng = block_rng(seed, block)
    counts = np.tile(initial, (BLOCK_SIZE, 1))
    capped = np.zeros(BLOCK_SIZE, dtype=bool)
    traces = np.zeros((BLOCK_SIZE, n + 1, len(initial)), dtype=np.int64) if keep_traces else None
    if keep_traces:
        traces[:, 0] = counts
    for t in range(n):
        totals = counts.sum(axis=1)
        # Frozen rows keep their state: extinct ones stay at zero, capped ones are flagged
        live = np.flatnonzero((totals > 0) & ~capped)
        if live.size:
            counts[live] = step_counts(model, t, counts[live], rng)
            capped[live] |= counts[live].sum(axis=1) > particle_cap
        if keep_traces:
            traces[:, t + 1] = counts
    return counts, capped, traces


def run_ensemble(
    model: BranchingModel,
    n: int,
    R: int,
    seed: int,
    initial: Optional[Sequence[int]] = None,
    particle_cap: int = PARTICLE_CAP,
    workers: int = 1,
    traces: bool = False,
    progress: bool = False,
) -> Ensemble:
    """
    Simulate R independent trajectories for n generations.

    Args:
        model: The branching model.
        n: Generations to simulate (>= 0).
        R: Number of trajectories (>= 0).
        seed: Master seed.
        initial: Initial population; one type-1 particle by default.
        particle_cap: Trajectories whose population exceeds this are stopped and flagged.
        workers: Worker processes; the ensemble does not depend on this.
        traces: Keep per-generation counts of every trajectory.
        progress: Show a progress bar.

    Returns:
        Ensemble: Terminal states, cap flags and optional traces.
    """
    if n < 0:
        raise DomainError(f"generations must be >= 0, got {n}")
    seed = check_seed(seed)
    z0 = initial_population(model.d, initial)
    ranges = block_ranges(R)
    logger.info(f"Simulating '{model.name}': n={n}, R={R}, seed={seed}, workers={workers}")

    tasks = [(model, n, b, seed, z0, particle_cap, traces) for b, _, _ in ranges]
    results = run_blocks(_simulate_block, tasks, workers, progress, "Simulating trajectories")

    terminal = np.zeros((R, model.d), dtype=np.int64)
    capped = np.zeros(R, dtype=bool)
    kept = np.zeros((R, n + 1, model.d), dtype=np.int64) if traces else None
    for (b, start, stop), (counts, flags, block_traces) in zip(ranges, results):
        size = stop - start
        terminal[start:stop] = counts[:size]
        capped[start:stop] = flags[:size]
        if traces:
            kept[start:stop] = block_traces[:size]

    if capped.any():
        logger.warning(f"{int(capped.sum())} of {R} trajectories hit the particle cap {particle_cap}")
    return Ensemble(
        model_name=model.name,
        kind="discrete",
        horizon=n,
        seed=seed,
        initial=z0,
        terminal=terminal,
        capped=capped,
        traces=kept,
    )


def run_blocks(worker, tasks, workers: int, progress: bool, label: str) -> list:
    """Run block tasks serially or on a process pool; results keep task order."""
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    results = []
    with Progress(disable=not progress) as bar:
        task = bar.add_task(f"[magenta]{label}...", total=len(tasks))
        if workers == 1 or len(tasks) <= 1:
            for args in tasks:
                results.append(worker(args))
                bar.update(task, advance=1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(worker, tasks):
                    results.append(result)
                    bar.update(task, advance=1)
    return results
