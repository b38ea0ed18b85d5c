from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from branchenv.model.branching_model import BranchingModel
from branchenv.tools.errors import DomainError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.genfun")

# Below this value the complement iteration switches to the linearized log-space update
TINY = 1e-280


def _check_window(k: int, n: int):
    if k < 0 or k > n:
        raise DomainError(f"composition needs 0 <= k <= n, got k={k}, n={n}")


def compose_pgf(model: BranchingModel, k: int, n: int, s) -> np.ndarray:
    """
    f_{k,n}(s) = (g_k o g_{k+1} o ... o g_{n-1})(s).

    Args:
        model: The branching model.
        k: First generation of the window.
        n: One past the last generation (k <= n).
        s: Point of [0,1]^d, or stacked (R, d) points.

    Returns:
        np.ndarray: f_{k,n}(s) with the same shape as s.
    """
    _check_window(k, n)
    s = np.array(s, dtype=float)
    if s.shape[-1] != model.d:
        raise DomainError(f"s must have {model.d} components, got shape {s.shape}")
    if np.any(np.isnan(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise DomainError(f"s must lie in [0,1]^{model.d}")
    for t in range(n - 1, k - 1, -1):
        s = np.clip(model.apply_pgf(t, s), 0.0, 1.0)
    return s


def compose_complement(model: BranchingModel, k: int, n: int, q) -> np.ndarray:
    """
    1 - f_{k,n}(1 - q), evaluated step by step without forming 1 - q.

    Args:
        model: The branching model.
        k: First generation of the window.
        n: One past the last generation.
        q: Complement point 1 - s in [0,1]^d, or stacked points.

    Returns:
        np.ndarray: The complement of the composition.
    """
    _check_window(k, n)
    q = np.array(q, dtype=float)
    if q.shape[-1] != model.d:
        raise DomainError(f"q must have {model.d} components, got shape {q.shape}")
    for t in range(n - 1, k - 1, -1):
        q = np.clip(model.apply_complement(t, q), 0.0, 1.0)
    return q


def complement_step_log(model: BranchingModel, t: int, log_q: np.ndarray) -> np.ndarray:
    """
    One step log q -> log(1 - g_t(1 - q)) for stacked (R, d) rows.

    Rows whose result would fall below TINY use the linearized update
    log(A_t q), accurate to relative order q there.
    """
    with np.errstate(under="ignore"):
        q = np.exp(log_q)
    direct = model.apply_complement(t, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_direct = np.log(direct)
        log_A = np.log(model.mean_matrix(t))
        linear = logsumexp(log_q[:, None, :] + log_A[None, :, :], axis=2)
    return np.minimum(np.where(direct >= TINY, log_direct, linear), 0.0)


def log_survival_curve(model: BranchingModel, N: int) -> np.ndarray:
    """
    log P(Z_n != 0 | Z_0 = e_j) for n = 0..N and every type j.

    Every target n is iterated at once: at step t the rows n > t receive
    g_t, so row n has seen g_{n-1}, ..., g_0 when t reaches 0.

    Args:
        model: The branching model.
        N: Last generation (>= 0).

    Returns:
        np.ndarray: (N + 1, d) array of log survival probabilities.
    """
    if N < 0:
        raise DomainError(f"horizon must be >= 0, got {N}")
    log_q = np.zeros((N + 1, model.d))
    for t in range(N - 1, -1, -1):
        log_q[t + 1 :] = complement_step_log(model, t, log_q[t + 1 :])
    # Survival cannot increase with n
    np.minimum.accumulate(log_q, axis=0, out=log_q)
    return log_q


def extinction_curve(model: BranchingModel, N: int) -> np.ndarray:
    """
    Survival probabilities 1 - f_{0,n}^j(0) for n = 0..N.

    Args:
        model: The branching model.
        N: Last generation (>= 1).

    Returns:
        np.ndarray: (N + 1, d) array; column j starts from one type-j particle.
    """
    if N < 1:
        raise DomainError(f"horizon must be >= 1, got {N}")
    logger.info(f"Extinction curve for '{model.name}' up to n={N}")
    with np.errstate(under="ignore"):
        return np.exp(log_survival_curve(model, N))


def skip_extinction_floor(
    model: BranchingModel, l: int, count: int
) -> Tuple[float, Tuple[int, int]]:
    """
    Smallest one-step extinction probability f_{nl,(n+1)l}^j(0) of the l-skipped
    process over n < count.

    Args:
        model: The branching model.
        l: Skip length (>= 1).
        count: Number of skipped steps to inspect (>= 1).

    Returns:
        tuple: (floor value, (n, j) where it is attained).
    """
    if l < 1 or count < 1:
        raise DomainError(f"need l >= 1 and count >= 1, got l={l}, count={count}")
    best, where = np.inf, (0, 0)
    seen = {}
    for n in range(count):
        key = tuple(model.segment_index(t) for t in range(n * l, (n + 1) * l))
        if key not in seen:
            seen[key] = compose_pgf(model, n * l, (n + 1) * l, np.zeros(model.d))
        values = seen[key]
        j = int(np.argmin(values))
        if values[j] < best:
            best, where = float(values[j]), (n, j)
    return best, where
