from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from branchenv.model.branching_model import BranchingModel, mean_matrices, unique_laws
from branchenv.tools.errors import AssumptionError, DomainError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.model")


@dataclass(frozen=True)
class CellCheck:
    """Assumption 1 and (JIn) values for one (n, j, i) cell."""

    n: int
    j: int
    i: int
    prob_at_least_two: float
    factorial_second_moment: float
    passed: bool


@dataclass(frozen=True)
class ParentCheck:
    """Assumption 2 and 3 values for one (n, j) parent."""

    n: int
    j: int
    prob_extinct: float
    second_moment: float
    passed: bool


@dataclass(frozen=True)
class AssumptionReport:
    """
    Outcome of checking the non-degeneracy assumptions over a horizon.

    Attributes:
        horizon: Requested horizon N.
        checked_generations: Generations actually inspected (one tail period suffices).
        cells: Assumption 1 / (JIn) values per (n, j, i).
        parents: Assumption 2 / 3 values per (n, j).
        assumption1: Every P(Z(i) >= 2 | e_j) reached the floor.
        assumption2: Every P(Z = 0 | e_j) reached the floor.
        assumption3: Every E||Z||^2 is finite (always true for finite support).
        epsilon0: Achieved epsilon_0 (min of both probability bounds).
        K0: Achieved K_0 (max second moment).
        jin_min: Minimum of E(Z(i)^2 - Z(i) | e_j) over the cells.
        assumption4: Finite-support proxy verdict for uniform integrability.
        unicrit_low: Smallest entry of M_{n,n+k} over 0 <= n < n+k <= horizon.
        unicrit_high: Largest entry of the same products.
        unicrit_b: max(unicrit_high, 1/unicrit_low), the implied uniform-criticality constant.
        unicrit_drift: log b over the full product window minus log b over its first half.
        bounded_mean: max over n, k, j of E(|Z_{n+k}| | Z_n = e_j).
        floor: Probability floor used for pass/fail.
    """

    horizon: int
    checked_generations: int
    cells: Tuple[CellCheck, ...]
    parents: Tuple[ParentCheck, ...]
    assumption1: bool
    assumption2: bool
    assumption3: bool
    epsilon0: float
    K0: float
    jin_min: float
    assumption4: dict
    unicrit_low: float
    unicrit_high: float
    unicrit_b: float
    unicrit_drift: float
    bounded_mean: float
    floor: float = 1e-12
    failures: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def R(self) -> float:
        """Cone bound sqrt(K0)/epsilon0 of the spectral construction."""
        if self.epsilon0 <= 0:
            return float("inf")
        return float(np.sqrt(self.K0) / self.epsilon0)

    def first_failure(self, which: Tuple[int, ...]) -> Optional[Tuple[str, tuple]]:
        """First failing cell among the requested assumptions, as (label, cell)."""
        if 1 in which:
            for cell in self.cells:
                if not cell.passed:
                    return "Assumption 1", (cell.n, cell.j, cell.i)
        if 2 in which:
            for parent in self.parents:
                if parent.prob_extinct < self.floor:
                    return "Assumption 2", (parent.n, parent.j, None)
        if 3 in which and not self.assumption3:
            for parent in self.parents:
                if not np.isfinite(parent.second_moment):
                    return "Assumption 3", (parent.n, parent.j, None)
        return None

    def require(self, which: Tuple[int, ...] = (1, 3)):
        """
        Raise AssumptionError citing the first failing cell of the given assumptions.

        Args:
            which: Assumption numbers to enforce.
        """
        failure = self.first_failure(which)
        if failure is not None:
            label, (n, j, i) = failure
            where = f"n={n}, j={j}" + (f", i={i}" if i is not None else "")
            raise AssumptionError(f"{label} fails at {where}", cell=(n, j, i), report=self)

    def summary(self) -> dict:
        """Compact JSON-ready view used inside other reports."""
        return {
            "horizon": self.horizon,
            "checked_generations": self.checked_generations,
            "assumption1": self.assumption1,
            "assumption2": self.assumption2,
            "assumption3": self.assumption3,
            "assumption4": self.assumption4,
            "epsilon0": self.epsilon0,
            "K0": self.K0,
            "R": self.R,
            "jin_min": self.jin_min,
            "unicrit": {
                "low": self.unicrit_low,
                "high": self.unicrit_high,
                "b": self.unicrit_b,
                "drift": self.unicrit_drift,
            },
            "bounded_mean": self.bounded_mean,
            "floor": self.floor,
            "failures": list(self.failures),
        }

    def to_dict(self) -> dict:
        """Full JSON-ready report including every checked cell."""
        return {
            **self.summary(),
            "cells": [
                {
                    "n": c.n,
                    "j": c.j,
                    "i": c.i,
                    "prob_at_least_two": c.prob_at_least_two,
                    "factorial_second_moment": c.factorial_second_moment,
                    "passed": c.passed,
                }
                for c in self.cells
            ],
            "parents": [
                {
                    "n": p.n,
                    "j": p.j,
                    "prob_extinct": p.prob_extinct,
                    "second_moment": p.second_moment,
                    "passed": p.passed,
                }
                for p in self.parents
            ],
        }


def product_extremes(model: BranchingModel, horizon: int) -> Tuple[float, float, float]:
    """
    Extremes of the mean products M_{n,n+k} over 0 <= n < n+k <= horizon.

    All products ending at the current generation are advanced together, one
    matrix multiplication per generation.

    Args:
        model: The branching model.
        horizon: Largest end index.

    Returns:
        tuple: (smallest entry, largest entry, largest row sum).
    """
    d = model.d
    low, high, row_max = np.inf, 0.0, 0.0
    products = np.zeros((0, d, d))
    identity = np.eye(d)[None]
    matrices = mean_matrices(model, 0, horizon)
    with np.errstate(over="ignore", invalid="ignore"):
        for A in matrices:
            products = np.concatenate([products, identity]) @ A
            low = min(low, float(products.min()))
            high = max(high, float(products.max()))
            row_max = max(row_max, float(products.sum(axis=2).max()))
    return low, high, row_max


def _unicrit_constant(low: float, high: float) -> float:
    """Smallest b with 1/b <= M_{n,n+k}(j, i) <= b over the inspected products."""
    return float(max(high, 1.0 / low)) if low > 0 and np.isfinite(high) else float("inf")


def validate_model(
    model: BranchingModel,
    horizon: int,
    floor: float = 1e-12,
    product_horizon: Optional[int] = None,
) -> AssumptionReport:
    """
    Check Assumptions 1-3, the (JIn) bound, the Assumption 4 proxy and the
    uniform-criticality diagnostic over generations n < horizon.

    Args:
        model: The branching model.
        horizon: Number of generations N >= 1 to cover.
        floor: Smallest probability bound that counts as positive.
        product_horizon: End index for the uniform-criticality products;
            defaults to the horizon.

    Returns:
        AssumptionReport: Pass/fail per cell plus the achieved constants.
    """
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    logger.info(f"Validating model '{model.name}' over horizon {horizon}")

    cells: List[CellCheck] = []
    parents: List[ParentCheck] = []
    failures: List[str] = []
    checked = set()
    for n, j, law in unique_laws(model, horizon):
        checked.add(n)
        at_least_two = law.prob_at_least_two()
        factorial = law.factorial_second_moment()
        for i in range(model.d):
            passed = bool(at_least_two[i] >= floor)
            cells.append(
                CellCheck(n, j, i, float(at_least_two[i]), float(factorial[i]), passed)
            )
            if not passed:
                failures.append(f"Assumption 1 fails at n={n}, j={j}, i={i}")
        p0 = law.prob_zero()
        second = law.norm_second_moment()
        passed = bool(p0 >= floor and np.isfinite(second))
        parents.append(ParentCheck(n, j, p0, second, passed))
        if p0 < floor:
            failures.append(f"Assumption 2 fails at n={n}, j={j}")

    epsilon0 = min(
        min(c.prob_at_least_two for c in cells), min(p.prob_extinct for p in parents)
    )
    K0 = max(p.second_moment for p in parents)
    end = product_horizon or horizon
    low, high, row_max = product_extremes(model, end)
    unicrit_b = _unicrit_constant(low, high)
    half_b = _unicrit_constant(*product_extremes(model, max(1, end // 2))[:2])
    if np.isfinite(unicrit_b) and np.isfinite(half_b):
        unicrit_drift = float(np.log(unicrit_b) - np.log(half_b))
    else:
        unicrit_drift = float("inf")

    report = AssumptionReport(
        horizon=horizon,
        checked_generations=len(checked),
        cells=tuple(cells),
        parents=tuple(parents),
        assumption1=all(c.passed for c in cells),
        assumption2=all(p.prob_extinct >= floor for p in parents),
        assumption3=all(np.isfinite(p.second_moment) for p in parents),
        epsilon0=float(epsilon0),
        K0=float(K0),
        jin_min=float(min(c.factorial_second_moment for c in cells)),
        assumption4={
            "verdict": "pass",
            "basis": "finite-support proxy",
            "max_offspring": model.max_offspring(),
        },
        unicrit_low=low,
        unicrit_high=high,
        unicrit_b=float(unicrit_b),
        unicrit_drift=unicrit_drift,
        bounded_mean=row_max,
        floor=floor,
        failures=tuple(failures),
    )

    if failures:
        logger.warning(f"Model '{model.name}': {len(failures)} assumption failure(s)")
    logger.info(
        f"Model '{model.name}': epsilon0={report.epsilon0:.6g}, K0={report.K0:.6g}, b={report.unicrit_b:.6g}"
    )
    return report
