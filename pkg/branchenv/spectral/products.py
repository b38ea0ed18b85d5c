from typing import Tuple

import numpy as np

from branchenv.model.branching_model import BranchingModel, mean_matrices
from branchenv.tools.errors import DomainError


def product_matrix(model: BranchingModel, k: int, n: int) -> np.ndarray:
    """
    Mean-matrix product M_{k,n} = A_k A_{k+1} ... A_{n-1}.

    Args:
        model: The branching model.
        k: First factor index.
        n: One past the last factor index (k <= n).

    Returns:
        np.ndarray: d x d matrix, identity when k == n.
    """
    if k < 0 or k > n:
        raise DomainError(f"product needs 0 <= k <= n, got k={k}, n={n}")
    result = np.eye(model.d)
    for A in mean_matrices(model, k, n):
        result = result @ A
    return result


def normalized_products(model: BranchingModel, lam: np.ndarray, N: int):
    """
    Yield (n, P) for n = 1..N where P[k] = M_{k,n} / (Lambda_n / Lambda_k), k < n.

    All products ending at n are advanced together with one stacked
    multiplication per generation.
    """
    d = model.d
    stack = np.zeros((0, d, d))
    identity = np.eye(d)[None]
    for n, A in enumerate(mean_matrices(model, 0, N)):
        stack = (np.concatenate([stack, identity]) @ A) / lam[n]
        yield n + 1, stack


def ratio_band(model: BranchingModel, eigs) -> Tuple[float, float, float]:
    """
    Empirical constant K with 1/K <= M_{k,n}(j, i) / (Lambda_n / Lambda_k) <= K
    over 0 <= k < n <= N.

    Args:
        model: The branching model.
        eigs: EigenSequence covering the horizon.

    Returns:
        tuple: (K, smallest ratio, largest ratio).
    """
    low, high = np.inf, 0.0
    for _, stack in normalized_products(model, eigs.lam, eigs.horizon):
        low = min(low, float(stack.min()))
        high = max(high, float(stack.max()))
    if eigs.horizon == 0:
        return 1.0, 1.0, 1.0
    K = max(high, 1.0 / low) if low > 0 else float("inf")
    return float(K), float(low), float(high)
