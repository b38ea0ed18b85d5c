from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from branchenv.tools.errors import DomainError


@dataclass(frozen=True)
class PopulationState:
    """Type counts Z = (Z(1), ..., Z(d)) of one population."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DomainError(f"population counts must be nonnegative, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of(cls, counts) -> "PopulationState":
        return cls(tuple(np.asarray(counts).tolist()))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def extinct(self) -> bool:
        return self.total == 0

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """
    Terminal states of R independent trajectories.

    Attributes:
        model_name: Label of the simulated model.
        kind: "discrete" (horizon counts generations) or "continuous" (horizon is a time).
        horizon: Generations n or time T reached by every trajectory.
        seed: Master seed.
        initial: Initial population of every trajectory.
        terminal: (R, d) terminal type counts.
        capped: (R,) flags of trajectories stopped at the particle cap.
        traces: Optional (R, n + 1, d) per-generation counts.
    """

    model_name: str
    kind: str
    horizon: float
    seed: int
    initial: np.ndarray
    terminal: np.ndarray
    capped: np.ndarray
    traces: Optional[np.ndarray] = None

    @property
    def R(self) -> int:
        return self.terminal.shape[0]

    @property
    def d(self) -> int:
        return self.terminal.shape[1]

    @property
    def survived(self) -> np.ndarray:
        return self.terminal.sum(axis=1) > 0

    @property
    def survival_frequency(self) -> float:
        return float(self.survived.mean()) if self.R else float("nan")

    @property
    def capped_count(self) -> int:
        return int(self.capped.sum())

    def csv_header(self) -> List[str]:
        return ["trajectory", "survived"] + [f"Z_{i + 1}" for i in range(self.d)] + ["capped"]

    def csv_rows(self) -> List[list]:
        survived = self.survived
        return [
            [r, bool(survived[r])] + self.terminal[r].tolist() + [bool(self.capped[r])]
            for r in range(self.R)
        ]

    def summary(self) -> dict:
        return {
            "model": self.model_name,
            "kind": self.kind,
            "horizon": self.horizon,
            "R": self.R,
            "seed": self.seed,
            "initial": self.initial.tolist(),
            "survival_frequency": self.survival_frequency,
            "capped": self.capped_count,
        }
