import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from branchenv.model.branching_model import BranchingModel, ScheduleEntry, TailPolicy
from branchenv.model.offspring_law import OffspringLaw
from branchenv.tools.errors import DomainError, SupportCapError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.model")

# (offspring (m, d) int array, probs (m,) array)
Distribution = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SkipResult:
    """
    A skipped model together with its truncation bookkeeping.

    Attributes:
        model: The l-step model; its generation n covers generations nl..(n+1)l-1 of the source.
        l: Number of source generations per new generation.
        truncated_mass: Mass dropped from each new law, keyed by (n, j).
        max_support: Largest number of atoms of any new law.
    """

    model: BranchingModel
    l: int
    truncated_mass: Dict[Tuple[int, int], float] = field(default_factory=dict)
    max_support: int = 0

    @property
    def total_truncated(self) -> float:
        return float(max(self.truncated_mass.values(), default=0.0))

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "max_truncated_mass": self.total_truncated,
            "max_support": self.max_support,
            "truncated": [
                {"n": n, "j": j, "mass": mass}
                for (n, j), mass in sorted(self.truncated_mass.items())
                if mass > 0
            ],
        }


def _aggregate(offspring: np.ndarray, probs: np.ndarray, cap: int) -> Distribution:
    """Merge equal offspring vectors, summing their probabilities."""
    keys, inverse = np.unique(offspring, axis=0, return_inverse=True)
    if keys.shape[0] > cap:
        raise SupportCapError(
            f"skipped law support {keys.shape[0]} exceeds the support cap {cap}", cap=cap
        )
    merged = np.bincount(inverse.reshape(-1), weights=probs, minlength=keys.shape[0])
    return keys, merged


def _convolve(a: Distribution, b: Distribution, cap: int) -> Distribution:
    """Distribution of the sum of independent vectors drawn from a and b."""
    pairs = a[0].shape[0] * b[0].shape[0]
    if pairs > 64 * cap:
        raise SupportCapError(
            f"convolution of {pairs} atom pairs exceeds the support cap {cap}", cap=cap
        )
    d = a[0].shape[1]
    sums = (a[0][:, None, :] + b[0][None, :, :]).reshape(-1, d)
    weights = np.outer(a[1], b[1]).reshape(-1)
    return _aggregate(sums, weights, cap)


class _PowerCache:
    """Convolution powers Q_i^{*k} of the per-type distributions of one step."""

    def __init__(self, laws: List[Distribution], cap: int):
        self.laws = laws
        self.cap = cap
        d = laws[0][0].shape[1]
        self._zero = (np.zeros((1, d), dtype=np.int64), np.ones(1))
        self._cache: Dict[Tuple[int, int], Distribution] = {}

    def power(self, i: int, k: int) -> Distribution:
        if k == 0:
            return self._zero
        if k == 1:
            return self.laws[i]
        key = (i, k)
        if key not in self._cache:
            half = self.power(i, k // 2)
            result = _convolve(half, half, self.cap)
            if k % 2:
                result = _convolve(result, self.laws[i], self.cap)
            self._cache[key] = result
        return self._cache[key]


def _descend(
    laws: Tuple[OffspringLaw, ...], below: List[Distribution], cap: int
) -> List[Distribution]:
    """
    One backward step: law of the final population from a single parent of each
    type, given the final-population laws `below` of its children's generation.
    """
    cache = _PowerCache(below, cap)
    result = []
    for law in laws:
        parts_offspring, parts_probs = [], []
        for atom, p in zip(law.offspring, law.probs):
            if p == 0.0:
                continue
            dist = cache.power(0, int(atom[0]))
            for i in range(1, len(atom)):
                dist = _convolve(dist, cache.power(i, int(atom[i])), cap)
            parts_offspring.append(dist[0])
            parts_probs.append(p * dist[1])
        result.append(
            _aggregate(np.concatenate(parts_offspring), np.concatenate(parts_probs), cap)
        )
    return result


def _restore_mean(offspring: np.ndarray, probs: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    Tilt probs linearly, q_k (1 + <x_k - m, c>), so the mean becomes target.

    Normalisation is kept by construction. The tilt is skipped when it would
    make a weight negative.
    """
    points = offspring.astype(float)
    mean = probs @ points
    centred = points - mean
    covariance = (probs[:, None] * centred).T @ centred
    c, *_ = np.linalg.lstsq(covariance, target - mean, rcond=None)
    tilted = probs * (1.0 + centred @ c)
    if np.any(tilted < 0.0):
        return probs
    return tilted / tilted.sum()


def _truncate(dist: Distribution, mass_tol: float) -> Tuple[Distribution, float]:
    """
    Drop the lightest atoms whose combined mass stays below mass_tol / 2, then
    renormalise with the mean vector of the full law restored.
    """
    offspring, probs = dist
    target = probs @ offspring.astype(float) / probs.sum()
    keep = probs > 0.0
    offspring, probs = offspring[keep], probs[keep]
    order = np.argsort(probs, kind="stable")
    cumulative = np.cumsum(probs[order])
    drop = int(np.searchsorted(cumulative, mass_tol / 2.0, side="left"))
    drop = min(drop, probs.shape[0] - 1)
    dropped = float(cumulative[drop - 1]) if drop > 0 else 0.0
    kept = np.sort(order[drop:])
    offspring, probs = offspring[kept], probs[kept]
    probs = probs / probs.sum()
    if dropped > 0.0:
        probs = _restore_mean(offspring, probs, target)
    return (offspring, probs), dropped


def skip_window(
    model: BranchingModel, start: int, l: int, cap: int
) -> List[Distribution]:
    """
    Exact law of the population at generation start + l from one particle of
    each type at generation start, by backward composition over the window.

    Args:
        model: The source model.
        start: First generation of the window.
        l: Window length.
        cap: Support cap for every intermediate law.

    Returns:
        list: One (offspring, probs) distribution per starting type.
    """
    d = model.d
    unit = np.eye(d, dtype=np.int64)
    below = [(unit[i : i + 1], np.ones(1)) for i in range(d)]
    for t in range(start + l - 1, start - 1, -1):
        below = _descend(model.laws_at(t), below, cap)
    return below


def _window_key(model: BranchingModel, start: int, l: int) -> tuple:
    return tuple(model.segment_index(t) for t in range(start, start + l))


def skip_with_report(
    model: BranchingModel,
    l: int,
    mass_tol: float = 1e-9,
    support_cap: int = 1_000_000,
) -> SkipResult:
    """
    Build the skip-generation model whose one-step law at n is the law of
    Z_{(n+1)l} given Z_{nl} = e_j.

    Args:
        model: The source model.
        l: Generations per skipped step (>= 1).
        mass_tol: Largest mass each new law may lose to truncation, in (0, 1e-6].
        support_cap: Largest number of atoms any law (final or intermediate) may hold.

    Returns:
        SkipResult: The new model and the truncated mass per law.
    """
    if not isinstance(l, (int, np.integer)) or l < 1:
        raise DomainError(f"skip length l must be an integer >= 1, got {l!r}")
    if not 0.0 < mass_tol <= 1e-6:
        raise DomainError(f"mass_tol must lie in (0, 1e-6], got {mass_tol}")
    l = int(l)
    if l == 1:
        return SkipResult(
            model=model,
            l=1,
            truncated_mass={},
            max_support=max(law.size for e in model.schedule for law in e.laws),
        )

    # Step 1: the new generations that need their own law
    if model.tail.mode == "periodic":
        new_period = model.tail.period // math.gcd(model.tail.period, l)
        # windows starting at or after the source cycle repeat with new_period
        first_periodic = -(-model.tail_start() // l)
        generations = range(first_periodic + new_period)
        tail = TailPolicy("periodic", new_period)
    else:
        last_start = model.tail_start()
        generations = range(-(-last_start // l) + 1)
        tail = TailPolicy()

    # Step 2: compose each distinct window once
    logger.info(f"Skipping model '{model.name}' with l={l} over {len(generations)} windows")
    built: Dict[tuple, Tuple[Tuple[OffspringLaw, ...], List[float]]] = {}
    truncated: Dict[Tuple[int, int], float] = {}
    schedule: List[ScheduleEntry] = []
    max_support = 0
    for n in generations:
        key = _window_key(model, n * l, l)
        if key not in built:
            laws, losses = [], []
            for dist in skip_window(model, n * l, l, support_cap):
                (offspring, probs), dropped = _truncate(dist, mass_tol)
                laws.append(OffspringLaw(offspring, probs))
                losses.append(dropped)
            built[key] = (tuple(laws), losses)
        laws, losses = built[key]
        for j, lost in enumerate(losses):
            truncated[(n, j)] = lost
        max_support = max(max_support, max(law.size for law in laws))
        # Step 3: collapse runs of identical laws into one schedule entry;
        # a periodic cycle must end on an entry of its own
        cycle_end = tail.mode == "periodic" and n == generations[-1]
        if not schedule or schedule[-1].laws != laws or cycle_end:
            schedule.append(ScheduleEntry(n, laws))

    skipped = BranchingModel(
        d=model.d, schedule=tuple(schedule), tail=tail, name=f"{model.name}-skip{l}"
    )
    worst = max(truncated.values(), default=0.0)
    if worst > 0:
        logger.info(f"Skipped model '{skipped.name}': truncated at most {worst:.3g} mass per law")
    return SkipResult(model=skipped, l=l, truncated_mass=truncated, max_support=max_support)


def skip_generations(
    model: BranchingModel,
    l: int,
    mass_tol: float = 1e-9,
    support_cap: int = 1_000_000,
) -> BranchingModel:
    """
    Skip-generation model: observe the process every l generations.

    Args:
        model: The source model.
        l: Generations per skipped step (>= 1); l = 1 returns the model unchanged.
        mass_tol: Largest mass each new law may lose to truncation.
        support_cap: Largest number of atoms any law may hold.

    Returns:
        BranchingModel: The skipped model.
    """
    return skip_with_report(model, l, mass_tol, support_cap).model
