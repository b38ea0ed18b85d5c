import numpy as np

from branchenv.tools.errors import DomainError


def _positive(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError(f"{name} must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise DomainError(f"{name} must be strictly positive, got {x.tolist()}")
    return x


def hilbert_distance(u, v) -> float:
    """
    Hilbert projective distance ln(max v_i/u_i) - ln(min v_i/u_i).

    Args:
        u: Strictly positive vector.
        v: Strictly positive vector of the same length.

    Returns:
        float: Nonnegative distance, zero iff v is a multiple of u.
    """
    u = _positive(u, "u")
    v = _positive(v, "v")
    if u.shape != v.shape:
        raise DomainError(f"vector lengths differ: {u.shape} vs {v.shape}")
    logs = np.log(v) - np.log(u)
    return float(logs.max() - logs.min())


def projective_diameter(A) -> float:
    """
    Hilbert diameter of the cone spanned by the columns of a positive matrix,
    max over rows i, j and columns k, l of ln(A_ik A_jl / (A_jk A_il)).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or np.any(A <= 0.0):
        raise DomainError("projective diameter needs a strictly positive matrix")
    logs = np.log(A)
    diffs = logs[:, :, None] - logs[:, None, :]
    return float((diffs.max(axis=0) - diffs.min(axis=0)).max())


def birkhoff_coefficient(A) -> float:
    """
    Birkhoff contraction coefficient tanh(diam / 4) of a strictly positive matrix:
    hilbert_distance(A u, A v) <= coefficient * hilbert_distance(u, v).
    """
    return float(np.tanh(projective_diameter(A) / 4.0))


def norm_bound(distance: float) -> float:
    """Upper bound e^d - 1 on the l1 distance of unit vectors at Hilbert distance d."""
    return float(np.expm1(distance))


def contraction_bound(R: float, k: int) -> float:
    """
    Hilbert distance between v_n and its k-step look-ahead estimate, given
    the cone bound R: 2 ln R * tanh(ln R / 2)^(k - 1).
    """
    log_r = np.log(R)
    return float(2.0 * log_r * np.tanh(log_r / 2.0) ** (k - 1))


def certified_lookahead(R: float, tol: float, cap: int) -> int:
    """
    Smallest look-ahead k whose certified norm error e^bound - 1 is at most tol.

    Args:
        R: Cone bound sqrt(K0)/epsilon0 (> 1).
        tol: Target l1 error.
        cap: Largest acceptable look-ahead.

    Returns:
        int: The look-ahead length, or cap + 1 when the cap does not suffice.
    """
    if not np.isfinite(R):
        return cap + 1
    target = np.log1p(tol)
    diameter = 2.0 * np.log(R)
    if diameter <= target:
        return 1
    rate = np.tanh(np.log(R) / 2.0)
    k = 1 + int(np.ceil(np.log(target / diameter) / np.log(rate)))
    while k > 1 and contraction_bound(R, k - 1) <= target:
        k -= 1
    while k <= cap and contraction_bound(R, k) > target:
        k += 1
    return min(k, cap + 1)
