from typing import List, Sequence

import numpy as np

from branchenv.model.branching_model import BranchingModel
from branchenv.model.offspring_law import OffspringLaw
from branchenv.tools.errors import DomainError


def offspring_covariance(law: OffspringLaw) -> np.ndarray:
    """Covariance matrix sigma^2 of one parent's offspring vector."""
    return law.covariance()


def mean_sequence(model: BranchingModel, initial: Sequence[float], N: int) -> np.ndarray:
    """
    Expected population E Z_n = M_{0,n}^T Z_0 for n = 0..N.

    Args:
        model: The branching model.
        initial: Initial population Z_0.
        N: Last generation.

    Returns:
        np.ndarray: (N + 1, d) array of expected type counts.
    """
    if N < 0:
        raise DomainError(f"horizon must be >= 0, got {N}")
    m = np.asarray(initial, dtype=float)
    if m.shape != (model.d,):
        raise DomainError(f"initial population must have {model.d} components")
    out = np.empty((N + 1, model.d))
    out[0] = m
    for n in range(N):
        m = model.mean_matrix(n).T @ m
        out[n + 1] = m
    return out


def covariance_sequence(model: BranchingModel, j: int, N: int) -> List[np.ndarray]:
    """
    Covariance matrices D_0..D_N of Z_n started from one type-j particle.

    Uses D_{n+1} = A_n^T D_n A_n + S_n with S_n = sum_i M_n(j, i) sigma_n^2(i),
    where M_n(j, i) is the expected number of type-i particles at generation n.

    Args:
        model: The branching model.
        j: Initial type.
        N: Last generation (>= 0).

    Returns:
        list: N + 1 symmetric positive semidefinite d x d matrices, D_0 = 0.
    """
    if not 0 <= j < model.d:
        raise DomainError(f"type index must be in [0, {model.d}), got {j}")
    if N < 0:
        raise DomainError(f"horizon must be >= 0, got {N}")
    d = model.d
    D = np.zeros((d, d))
    mean = np.eye(d)[j]
    result = [D.copy()]
    for n in range(N):
        A = model.mean_matrix(n)
        laws = model.laws_at(n)
        S = sum(mean[i] * offspring_covariance(laws[i]) for i in range(d))
        D = A.T @ D @ A + S
        D = 0.5 * (D + D.T)
        mean = A.T @ mean
        result.append(D)
    return result
