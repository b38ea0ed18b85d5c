"""
Continuous-time branching models with piecewise-constant rates and laws.

Model file schema::

    {
      "d": 1,
      "name": "optional label",
      "pieces": [
        {"start": 0.0, "rates": [1.0], "laws": [[{"offspring": [0], "p": 0.5},
                                                 {"offspring": [2], "p": 0.5}]]}
      ],
      "rate_bound": 1.0            # optional, defaults to the largest rate
    }

Each piece is in force from its start until the next start; the last one forever.
"""

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from branchenv.model.model_io import check_fields, parse_law
from branchenv.model.offspring_law import OffspringLaw
from branchenv.tools.errors import ModelValidationError

CT_FIELDS = {"d", "name", "pieces", "rate_bound"}
PIECE_FIELDS = {"start", "rates", "laws"}


@dataclass(frozen=True)
class CTPiece:
    """Rates and laws in force from time `start` on."""

    start: float
    rates: Tuple[float, ...]
    laws: Tuple[OffspringLaw, ...]


@dataclass(frozen=True, eq=False)
class CTModel:
    """
    A d-type continuous-time branching process.

    A type-j particle alive at time t branches at rate rho_t(j), replacing
    itself by an offspring vector drawn from P_t(j, .).

    Attributes:
        d: Number of types.
        pieces: Pieces with strictly increasing starts, the first at 0.
        rate_bound: K0 >= every rate, the proposal rate of the thinning sampler.
        name: Label used in logs and reports.
    """

    d: int
    pieces: Tuple[CTPiece, ...]
    rate_bound: Optional[float] = None
    name: str = "ct-model"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not isinstance(self.d, int) or self.d < 1:
            raise ModelValidationError(f"d must be a positive integer, got {self.d!r}")
        if not self.pieces:
            raise ModelValidationError("a continuous-time model needs at least one piece")
        starts = [float(p.start) for p in self.pieces]
        if starts[0] != 0.0:
            raise ModelValidationError(f"first piece must start at 0, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ModelValidationError(f"piece starts must be strictly increasing, got {starts}")
        for piece in self.pieces:
            if len(piece.rates) != self.d or len(piece.laws) != self.d:
                raise ModelValidationError(
                    f"piece at {piece.start} needs {self.d} rates and {self.d} laws"
                )
            if any(not np.isfinite(r) or r <= 0 for r in piece.rates):
                raise ModelValidationError(f"rates at {piece.start} must be positive, got {list(piece.rates)}")
            if any(law.d != self.d for law in piece.laws):
                raise ModelValidationError(f"laws at {piece.start} must have dimension {self.d}")

        rates = np.array([p.rates for p in self.pieces], dtype=float)
        bound = float(rates.max()) if self.rate_bound is None else float(self.rate_bound)
        if bound < rates.max():
            raise ModelValidationError(f"rate_bound {bound} is below the largest rate {rates.max()}")
        means = np.stack([np.vstack([law.mean() for law in p.laws]) for p in self.pieces])
        object.__setattr__(self, "rate_bound", bound)
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "rates_table", rates)
        object.__setattr__(self, "_means", means)

    @property
    def starts(self) -> Tuple[float, ...]:
        return self._starts

    def piece_index(self, t: float) -> int:
        return bisect.bisect_right(self._starts, t) - 1

    def rates_at(self, t: float) -> np.ndarray:
        return self.rates_table[self.piece_index(t)]

    def laws_at(self, t: float) -> Tuple[OffspringLaw, ...]:
        return self.pieces[self.piece_index(t)].laws

    def generator_matrix(self, t: float) -> np.ndarray:
        """B(t) with B[j, i] = rho_t(j) (E X_j(i) - delta_ij)."""
        index = self.piece_index(t)
        rates = self.rates_table[index]
        return rates[:, None] * (self._means[index] - np.eye(self.d))

    def breakpoints(self, T: float) -> List[float]:
        """Piece starts strictly inside (0, T)."""
        return [s for s in self._starts if 0.0 < s < T]

    def describe(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "pieces": len(self.pieces),
            "rate_bound": self.rate_bound,
        }


@dataclass(frozen=True)
class CTAssumptionReport:
    """
    Per-piece check of the rate bounds and the non-degeneracy conditions.

    Attributes:
        rate_min: Smallest rate over all pieces.
        rate_max: Largest rate over all pieces.
        epsilon0: min of the smallest rate, P(X(i) >= 2) and P(X = 0) over pieces and types.
        K0: max of the rate bound and the second moments.
        assumption0: epsilon0 <= rho_t(j) <= K0 on every piece.
        assumption1: Every P(X(i) >= 2 | type j) is positive.
        assumption2: Every P(X = 0 | type j) is positive.
        assumption3: Every second moment is finite.
        failures: Readable descriptions of failing cells.
    """

    rate_min: float
    rate_max: float
    epsilon0: float
    K0: float
    assumption0: bool
    assumption1: bool
    assumption2: bool
    assumption3: bool
    failures: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "rate_min": self.rate_min,
            "rate_max": self.rate_max,
            "epsilon0": self.epsilon0,
            "K0": self.K0,
            "assumption0": self.assumption0,
            "assumption1": self.assumption1,
            "assumption2": self.assumption2,
            "assumption3": self.assumption3,
            "failures": list(self.failures),
        }


def validate_ct_model(ct: CTModel, floor: float = 1e-12) -> CTAssumptionReport:
    """
    Check rate bounds and the offspring-law conditions on every piece.

    Args:
        ct: The continuous-time model.
        floor: Smallest probability accepted as positive.

    Returns:
        CTAssumptionReport: Achieved constants and pass/fail flags.
    """
    failures = []
    at_least_two, extinct, second = [], [], []
    for piece in ct.pieces:
        for j, law in enumerate(piece.laws):
            p2 = law.prob_at_least_two()
            for i in np.flatnonzero(p2 < floor):
                failures.append(f"Assumption 1 fails at t={piece.start}, j={j}, i={int(i)}")
            p0 = law.prob_zero()
            if p0 < floor:
                failures.append(f"Assumption 2 fails at t={piece.start}, j={j}")
            at_least_two.append(float(p2.min()))
            extinct.append(p0)
            second.append(law.norm_second_moment())
    rate_min = float(ct.rates_table.min())
    rate_max = float(ct.rates_table.max())
    epsilon0 = min(rate_min, min(at_least_two), min(extinct))
    K0 = max(ct.rate_bound, max(second))
    return CTAssumptionReport(
        rate_min=rate_min,
        rate_max=rate_max,
        epsilon0=float(epsilon0),
        K0=float(K0),
        assumption0=bool(rate_min > 0 and rate_max <= ct.rate_bound),
        assumption1=min(at_least_two) >= floor,
        assumption2=min(extinct) >= floor,
        assumption3=bool(np.all(np.isfinite(second))),
        failures=tuple(failures),
    )


def ct_model_from_dict(document: dict) -> CTModel:
    """Build a CTModel from a decoded model document."""
    check_fields(document, CT_FIELDS, {"d", "pieces"}, "model")
    d = document["d"]
    if not isinstance(d, int) or isinstance(d, bool):
        raise ModelValidationError("model.d must be an integer")
    if not isinstance(document["pieces"], list):
        raise ModelValidationError("model.pieces must be a list")
    pieces = []
    for index, entry in enumerate(document["pieces"]):
        where = f"model.pieces[{index}]"
        check_fields(entry, PIECE_FIELDS, PIECE_FIELDS, where)
        rates = entry["rates"]
        if not isinstance(rates, list) or not all(
            isinstance(r, (int, float)) and not isinstance(r, bool) for r in rates
        ):
            raise ModelValidationError(f"{where}.rates must be a list of numbers")
        if not isinstance(entry["start"], (int, float)) or isinstance(entry["start"], bool):
            raise ModelValidationError(f"{where}.start must be a number")
        if not isinstance(entry["laws"], list):
            raise ModelValidationError(f"{where}.laws must be a list")
        laws = tuple(parse_law(atoms, f"{where}.laws[{j}]") for j, atoms in enumerate(entry["laws"]))
        pieces.append(CTPiece(float(entry["start"]), tuple(float(r) for r in rates), laws))
    bound = document.get("rate_bound")
    if bound is not None and (not isinstance(bound, (int, float)) or isinstance(bound, bool)):
        raise ModelValidationError("model.rate_bound must be a number")
    return CTModel(
        d=d,
        pieces=tuple(pieces),
        rate_bound=None if bound is None else float(bound),
        name=str(document.get("name", "ct-model")),
    )


def ct_model_to_dict(ct: CTModel) -> dict:
    return {
        "d": ct.d,
        "name": ct.name,
        "pieces": [
            {
                "start": p.start,
                "rates": list(p.rates),
                "laws": [law.to_entries() for law in p.laws],
            }
            for p in ct.pieces
        ],
        "rate_bound": ct.rate_bound,
    }


def load_ct_model(path) -> CTModel:
    """Read and validate a continuous-time model file."""
    path = Path(path)
    if not path.is_file():
        raise ModelValidationError(f"model file not found: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise ModelValidationError(f"malformed JSON in {path}: {e}") from None
    if isinstance(document, dict) and "name" not in document:
        document = {**document, "name": path.stem}
    return ct_model_from_dict(document)
