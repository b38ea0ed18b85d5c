from typing import Iterable, Mapping, Sequence, Tuple

import numpy as np

from branchenv.tools.errors import DomainError, ModelValidationError

PMF_TOL = 1e-12


class OffspringLaw:
    """
    Finite-support distribution of the offspring vector of one particle.

    Each atom is a d-vector of nonnegative integer child counts (one count per
    type) with its probability. Instances are immutable: the backing arrays are
    read-only and every derived quantity is computed from them.

    Attributes:
        offspring: (m, d) integer array, one distinct offspring vector per row.
        probs: (m,) float array of probabilities summing to 1.
    """

    __slots__ = ("offspring", "probs", "_key")

    def __init__(self, offspring, probs, pmf_tol: float = PMF_TOL):
        """
        Build and validate a law.

        Args:
            offspring: Sequence of offspring vectors (all the same length d >= 1).
            probs: Probability of each offspring vector.
            pmf_tol: Allowed deviation of the total mass from 1.
        """
        offspring = np.array(offspring, dtype=np.int64, ndmin=2)
        probs = np.array(probs, dtype=float).reshape(-1)

        if offspring.shape[0] == 0 or offspring.shape[1] == 0:
            raise ModelValidationError("offspring law needs at least one atom")
        if offspring.shape[0] != probs.shape[0]:
            raise ModelValidationError(
                f"{offspring.shape[0]} offspring vectors but {probs.shape[0]} probabilities"
            )
        if np.any(offspring < 0):
            raise ModelValidationError("offspring counts must be nonnegative")
        if np.any(~np.isfinite(probs)):
            raise ModelValidationError("probabilities must be finite")
        if np.any(probs < 0):
            raise ModelValidationError(
                f"negative probability {probs[probs < 0].min():g} in pmf"
            )
        total = float(probs.sum())
        if abs(total - 1.0) > pmf_tol:
            raise ModelValidationError(f"pmf mass {total:g} ≠ 1")
        if len({tuple(row) for row in offspring.tolist()}) != offspring.shape[0]:
            raise ModelValidationError("offspring vectors within one law must be distinct")

        # Canonical atom order so equal laws compare equal
        order = np.lexsort(offspring.T[::-1])
        offspring = offspring[order]
        probs = probs[order]
        offspring.flags.writeable = False
        probs.flags.writeable = False

        object.__setattr__(self, "offspring", offspring)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(
            self, "_key", (tuple(map(tuple, offspring.tolist())), tuple(probs.tolist()))
        )

    def __setattr__(self, name, value):
        raise AttributeError("OffspringLaw is immutable")

    def __reduce__(self):
        return (self.__class__, (self.offspring.tolist(), self.probs.tolist()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[Sequence[int], float]]) -> "OffspringLaw":
        """
        Build a law from (offspring vector, probability) pairs.

        Args:
            pairs: Iterable of (offspring, p).

        Returns:
            OffspringLaw: The validated law.
        """
        pairs = list(pairs)
        return cls([list(a) for a, _ in pairs], [p for _, p in pairs])

    @classmethod
    def scalar(cls, pmf: Mapping[int, float]) -> "OffspringLaw":
        """
        Build a single-type law from a {child count: probability} mapping.

        Example:
            OffspringLaw.scalar({0: 0.5, 2: 0.5})
        """
        return cls([[k] for k in pmf], list(pmf.values()))

    @property
    def d(self) -> int:
        return self.offspring.shape[1]

    @property
    def size(self) -> int:
        return self.offspring.shape[0]

    def key(self) -> tuple:
        """Hashable identity of the law (canonical atoms and probabilities)."""
        return self._key

    def __eq__(self, other):
        if not isinstance(other, OffspringLaw):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        atoms = ", ".join(
            f"{tuple(a)}: {p:g}" for a, p in zip(self.offspring.tolist(), self.probs)
        )
        return f"OffspringLaw({{{atoms}}})"

    def to_entries(self) -> list[dict]:
        """Atoms as JSON-ready dicts {offspring: [...], p: float}."""
        return [
            {"offspring": list(a), "p": float(p)}
            for a, p in zip(self.offspring.tolist(), self.probs)
        ]

    def as_dict(self) -> dict:
        """Atoms as {offspring tuple: probability}."""
        return {tuple(a): float(p) for a, p in zip(self.offspring.tolist(), self.probs)}

    # Moments

    def mean(self) -> np.ndarray:
        """Expected number of children of each type."""
        return self.probs @ self.offspring

    def second_moment_matrix(self) -> np.ndarray:
        """E[X X^T] of the offspring vector X."""
        weighted = self.offspring * self.probs[:, None]
        return weighted.T @ self.offspring

    def covariance(self) -> np.ndarray:
        """Covariance matrix of the offspring vector."""
        mean = self.mean()
        return self.second_moment_matrix() - np.outer(mean, mean)

    def norm_second_moment(self) -> float:
        """E(||X||^2) with the l1 norm of the offspring vector."""
        totals = self.offspring.sum(axis=1)
        return float(self.probs @ (totals.astype(float) ** 2))

    def factorial_second_moment(self) -> np.ndarray:
        """E(X_i^2 - X_i) for each type i."""
        x = self.offspring.astype(float)
        return self.probs @ (x * x - x)

    def prob_at_least_two(self) -> np.ndarray:
        """P(X_i >= 2) for each type i."""
        return self.probs @ (self.offspring >= 2)

    def prob_zero(self) -> float:
        """P(X = 0), the probability of leaving no children."""
        return float(self.probs[np.all(self.offspring == 0, axis=1)].sum())

    def max_total(self) -> int:
        """Largest total number of children in the support."""
        return int(self.offspring.sum(axis=1).max())


def _check_unit_cube(s: np.ndarray, d: int, name: str = "s") -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != d:
        raise DomainError(f"{name} must have {d} components, got shape {s.shape}")
    if np.any(np.isnan(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise DomainError(f"{name} must lie in [0,1]^{d}, got {s.tolist()}")
    return s


def pgf_eval(law: OffspringLaw, s) -> float:
    """
    Evaluate the probability generating function of a law.

    Computes sum_a p(a) prod_i s_i^{a_i} with 0^0 = 1. A stacked (..., d)
    array of points is evaluated row by row.

    Args:
        law: The offspring law.
        s: Point of [0,1]^d, or an array of such points.

    Returns:
        float: g(s), or an array of values for stacked points.
    """
    s = _check_unit_cube(s, law.d)
    powers = np.prod(s[..., None, :] ** law.offspring, axis=-1)
    value = powers @ law.probs
    return float(value) if np.ndim(value) == 0 else value


def pgf_complement(law: OffspringLaw, q) -> float:
    """
    Evaluate 1 - g(1 - q) without cancellation.

    Each term 1 - prod_i (1 - q_i)^{a_i} is computed as -expm1(sum a_i log1p(-q_i)),
    which stays accurate when q is tiny (deep survival tails).

    Args:
        law: The offspring law.
        q: Point of [0,1]^d (the complement 1 - s), or stacked points.

    Returns:
        float: 1 - g(1 - q), or an array for stacked points.
    """
    q = _check_unit_cube(q, law.d, name="q")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log1p(-q)[..., None, :]
        exponents = np.where(law.offspring > 0, law.offspring * logs, 0.0).sum(axis=-1)
        terms = -np.expm1(exponents)
    value = terms @ law.probs
    return float(value) if np.ndim(value) == 0 else value


def pgf_gradient(law: OffspringLaw, s) -> np.ndarray:
    """
    Gradient of the pgf at s.

    Args:
        law: The offspring law.
        s: Point of [0,1]^d.

    Returns:
        np.ndarray: The d first partial derivatives; equals law.mean() at s = 1.
    """
    s = _check_unit_cube(s, law.d)
    d = law.d
    gradient = np.zeros(d)
    for a in range(d):
        coef = law.offspring[:, a].astype(float)
        exps = law.offspring - np.eye(d, dtype=np.int64)[a]
        exps = np.where(coef[:, None] > 0, exps, 0)
        gradient[a] = law.probs @ (coef * np.prod(s**exps, axis=1))
    return gradient


def pgf_hessian(law: OffspringLaw, s) -> np.ndarray:
    """
    Hessian matrix of the pgf at s.

    Args:
        law: The offspring law.
        s: Point of [0,1]^d.

    Returns:
        np.ndarray: Symmetric d x d matrix of mixed second partials, entrywise >= 0.
    """
    s = _check_unit_cube(s, law.d)
    d = law.d
    x = law.offspring
    unit = np.eye(d, dtype=np.int64)
    hessian = np.zeros((d, d))
    for a in range(d):
        for b in range(a, d):
            if a == b:
                coef = (x[:, a] * (x[:, a] - 1)).astype(float)
            else:
                coef = (x[:, a] * x[:, b]).astype(float)
            exps = np.where(coef[:, None] > 0, x - unit[a] - unit[b], 0)
            hessian[a, b] = hessian[b, a] = law.probs @ (coef * np.prod(s**exps, axis=1))
    return hessian
