import bisect
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from branchenv.model.offspring_law import OffspringLaw, pgf_complement, pgf_eval
from branchenv.tools.errors import DomainError, ModelValidationError

TAIL_MODES = ("repeat_last", "periodic")


@dataclass(frozen=True)
class TailPolicy:
    """
    How the finite schedule extends to every generation.

    Attributes:
        mode: "repeat_last" keeps the last scheduled laws forever;
              "periodic" repeats the last `period` generations up to and
              including the last schedule start; earlier entries form a
              transient prefix.
        period: Period length for the periodic mode, None otherwise.
    """

    mode: str = "repeat_last"
    period: Optional[int] = None

    def __post_init__(self):
        if self.mode not in TAIL_MODES:
            raise ModelValidationError(
                f"tail mode must be one of {TAIL_MODES}, got '{self.mode}'"
            )
        if self.mode == "periodic":
            if not isinstance(self.period, int) or self.period < 1:
                raise ModelValidationError(
                    f"periodic tail needs an integer period >= 1, got {self.period!r}"
                )
        elif self.period is not None:
            raise ModelValidationError("repeat_last tail takes no period")

    def to_dict(self) -> dict:
        if self.mode == "periodic":
            return {"mode": "periodic", "period": self.period}
        return {"mode": "repeat_last"}


@dataclass(frozen=True)
class ScheduleEntry:
    """Laws (one per parent type) in force from generation `start` on."""

    start: int
    laws: Tuple[OffspringLaw, ...]


@dataclass(frozen=True, eq=False)
class BranchingModel:
    """
    A d-type branching process whose offspring laws depend on the generation.

    Attributes:
        d: Number of types.
        schedule: Schedule entries with strictly increasing starts, the first at 0.
        tail: Policy extending the schedule to all n >= 0.
        name: Label used in logs and reports.
    """

    d: int
    schedule: Tuple[ScheduleEntry, ...]
    tail: TailPolicy = field(default_factory=TailPolicy)
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(self.schedule))
        if not isinstance(self.d, int) or self.d < 1:
            raise ModelValidationError(f"d must be a positive integer, got {self.d!r}")
        if not self.schedule:
            raise ModelValidationError("schedule must contain at least one entry")

        starts = [entry.start for entry in self.schedule]
        if starts[0] != 0:
            raise ModelValidationError(f"first schedule start must be 0, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ModelValidationError(
                f"schedule starts must be strictly increasing, got {starts}"
            )
        for entry in self.schedule:
            if len(entry.laws) != self.d:
                raise ModelValidationError(
                    f"schedule entry at {entry.start} has {len(entry.laws)} laws, expected {self.d}"
                )
            for j, law in enumerate(entry.laws):
                if not isinstance(law, OffspringLaw):
                    raise ModelValidationError(
                        f"law for type {j} at {entry.start} is not an OffspringLaw"
                    )
                if law.d != self.d:
                    raise ModelValidationError(
                        f"law for type {j} at {entry.start} has offspring dimension {law.d}, expected {self.d}"
                    )

        means = tuple(
            np.vstack([law.mean() for law in entry.laws]) for entry in self.schedule
        )
        for matrix in means:
            matrix.flags.writeable = False
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "_means", means)

    @classmethod
    def constant(cls, laws: Sequence[OffspringLaw], name: str = "model") -> "BranchingModel":
        """
        Time-homogeneous model: the same laws in every generation.

        Args:
            laws: One law per parent type.
            name: Model label.
        """
        laws = tuple(laws)
        return cls(d=laws[0].d, schedule=(ScheduleEntry(0, laws),), name=name)

    @classmethod
    def periodic(
        cls, laws_per_step: Sequence[Sequence[OffspringLaw]], name: str = "model"
    ) -> "BranchingModel":
        """
        Model cycling through the given per-generation laws.

        Args:
            laws_per_step: laws_per_step[t] holds the d laws used at generations n = t mod period.
            name: Model label.
        """
        steps = [tuple(laws) for laws in laws_per_step]
        schedule = tuple(ScheduleEntry(t, laws) for t, laws in enumerate(steps))
        return cls(
            d=steps[0][0].d,
            schedule=schedule,
            tail=TailPolicy("periodic", len(steps)),
            name=name,
        )

    # Schedule lookup

    def segment_index(self, n: int) -> int:
        """Index of the schedule entry governing generation n."""
        if n < 0:
            raise DomainError(f"generation index must be >= 0, got {n}")
        if self.tail.mode == "periodic":
            first = self.tail_start()
            if n >= first:
                n = first + (n - first) % self.tail.period
        return bisect.bisect_right(self._starts, n) - 1

    def laws_at(self, n: int) -> Tuple[OffspringLaw, ...]:
        """The d laws used by parents living at generation n."""
        return self.schedule[self.segment_index(n)].laws

    def law(self, n: int, j: int) -> OffspringLaw:
        """Offspring law of a type-j parent at generation n."""
        if not 0 <= j < self.d:
            raise DomainError(f"type index must be in [0, {self.d}), got {j}")
        return self.laws_at(n)[j]

    def mean_matrix(self, n: int) -> np.ndarray:
        """A_n with A_n[j, i] = expected type-i children of a type-j parent."""
        return self._means[self.segment_index(n)]

    def distinct_span(self) -> int:
        """
        Number of leading generations after which the law sequence only repeats:
        one period for periodic tails, up to the last start for repeat_last.
        """
        if self.tail.mode == "periodic":
            return self.tail_start() + self.tail.period
        return self._starts[-1] + 1

    def tail_start(self) -> int:
        """First generation of the repeating tail."""
        if self.tail.mode == "periodic":
            return max(0, self._starts[-1] - self.tail.period + 1)
        return self._starts[-1]

    def tail_length(self) -> int:
        """Length of one repetition of the tail."""
        return self.tail.period if self.tail.mode == "periodic" else 1

    def apply_pgf(self, n: int, s: np.ndarray) -> np.ndarray:
        """
        Apply g_n componentwise: row r of the result is (g_n^j(s_r))_j.

        Args:
            n: Generation index.
            s: Point of [0,1]^d or stacked (R, d) points.
        """
        return np.stack([pgf_eval(law, s) for law in self.laws_at(n)], axis=-1)

    def apply_complement(self, n: int, q: np.ndarray) -> np.ndarray:
        """Apply q -> 1 - g_n(1 - q) componentwise, for point or stacked (R, d) input."""
        return np.stack([pgf_complement(law, q) for law in self.laws_at(n)], axis=-1)

    def max_offspring(self) -> int:
        """Largest total number of children of any law in the schedule."""
        return max(law.max_total() for entry in self.schedule for law in entry.laws)

    def permute_types(self, perm: Sequence[int]) -> "BranchingModel":
        """
        Relabel types: new type t is old type perm[t].

        Args:
            perm: A permutation of range(d).

        Returns:
            BranchingModel: The relabelled model.
        """
        perm = list(perm)
        if sorted(perm) != list(range(self.d)):
            raise DomainError(f"{perm} is not a permutation of range({self.d})")
        schedule = []
        for entry in self.schedule:
            laws = tuple(
                OffspringLaw(entry.laws[old].offspring[:, perm], entry.laws[old].probs)
                for old in perm
            )
            schedule.append(ScheduleEntry(entry.start, laws))
        return BranchingModel(self.d, tuple(schedule), self.tail, f"{self.name}-permuted")

    def describe(self) -> dict:
        """Short JSON-ready summary used in reports."""
        return {
            "name": self.name,
            "d": self.d,
            "schedule_entries": len(self.schedule),
            "tail": self.tail.to_dict(),
        }


def mean_matrix(model: BranchingModel, n: int) -> np.ndarray:
    """
    Mean matrix A_n of the model.

    Args:
        model: The branching model.
        n: Generation index (>= 0).

    Returns:
        np.ndarray: d x d matrix, A_n[j, i] = E(type-i children | type-j parent at time n).
    """
    return np.array(model.mean_matrix(n), dtype=float)


def mean_matrices(model: BranchingModel, start: int, stop: int) -> np.ndarray:
    """Stack A_start, ..., A_{stop-1} into a (stop - start, d, d) array."""
    if stop < start:
        raise DomainError(f"empty window [{start}, {stop})")
    if stop == start:
        return np.zeros((0, model.d, model.d))
    segments = [model.segment_index(n) for n in range(start, stop)]
    table = np.stack(model._means)
    return table[np.array(segments)]


def unique_laws(model: BranchingModel, horizon: int) -> List[Tuple[int, int, OffspringLaw]]:
    """
    The (n, j, law) cells that must be checked over a horizon; repeated segments
    collapse to their first occurrence.
    """
    seen = set()
    cells = []
    for n in range(min(horizon, model.distinct_span())):
        index = model.segment_index(n)
        if index in seen:
            continue
        seen.add(index)
        for j, law in enumerate(model.schedule[index].laws):
            cells.append((n, j, law))
    return cells
