from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from branchenv.genfun.composition import compose_complement, log_survival_curve
from branchenv.model.branching_model import BranchingModel, mean_matrices
from branchenv.model.offspring_law import pgf_hessian
from branchenv.spectral.eigen_sequence import EigenSequence
from branchenv.tools.errors import DomainError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.genfun")


@dataclass(frozen=True, eq=False)
class SeriesTable:
    """
    Survival asymptotics of a model over generations 0..N.

    Attributes:
        horizon: N.
        log_Xi: log of Xi_n = sum_{k<n} 1 / Lambda_{k+1} (-inf at n = 0).
        log_Gamma: log of the Hessian-weighted series Gamma_n (-inf at n = 0).
        log_Lambda: log Lambda_n.
        log_survival: (N + 1, d) log P(Z_n != 0 | Z_0 = e_j).
        log_alpha0: log alpha(n, 0) (-inf at n = 0, nan where alpha is not positive).
        alpha0: alpha(n, 0), signed.
        gamma_ratio: (N + 1, d) ratios <v_0,u_0> P(jZ_n != 0) Gamma_n / <v_0, e_j>.
        size_ratio: (N + 1, d) ratios Lambda_tilde_n Gamma_n P(jZ_n != 0) <u_n,u_n> / E<jZ_n, u_n>.
        u0: Initial backward vector of the eigen sequence.
    """

    horizon: int
    log_Xi: np.ndarray
    log_Gamma: np.ndarray
    log_Lambda: np.ndarray
    log_survival: np.ndarray
    log_alpha0: np.ndarray
    alpha0: np.ndarray
    gamma_ratio: np.ndarray
    size_ratio: np.ndarray
    u0: np.ndarray

    @property
    def d(self) -> int:
        return self.log_survival.shape[1]

    @property
    def Xi(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_Xi)

    @property
    def Gamma(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_Gamma)

    @property
    def survival(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_survival)

    def csv_header(self) -> List[str]:
        return (
            ["n", "Xi", "Gamma", "log_Lambda"]
            + [f"surv_{j + 1}" for j in range(self.d)]
            + ["alpha0", "log_Xi", "log_Gamma"]
            + [f"log_surv_{j + 1}" for j in range(self.d)]
        )

    def csv_rows(self) -> List[list]:
        Xi, Gamma, survival = self.Xi, self.Gamma, self.survival
        return [
            [n, Xi[n], Gamma[n], self.log_Lambda[n]]
            + survival[n].tolist()
            + [self.alpha0[n], self.log_Xi[n], self.log_Gamma[n]]
            + self.log_survival[n].tolist()
            for n in range(self.horizon + 1)
        ]

    def summary(self) -> dict:
        N = self.horizon
        return {
            "horizon": N,
            "Xi_N": float(self.Xi[N]),
            "Gamma_N": float(self.Gamma[N]),
            "log_Xi_N": float(self.log_Xi[N]),
            "log_Gamma_N": float(self.log_Gamma[N]),
            "survival_N": self.survival[N].tolist(),
            "alpha0_N": float(self.alpha0[N]),
            "gamma_ratio_N": self.gamma_ratio[N].tolist(),
            "size_ratio_N": self.size_ratio[N].tolist(),
        }


def _hessians_at_one(model: BranchingModel, n: int, cache: Dict[int, np.ndarray]) -> np.ndarray:
    """(d, d, d) stack of the Hessians of g_n^j at 1, cached per schedule segment."""
    index = model.segment_index(n)
    if index not in cache:
        ones = np.ones(model.d)
        cache[index] = np.stack([pgf_hessian(law, ones) for law in model.schedule[index].laws])
    return cache[index]


def normalized_rows(model: BranchingModel, eigs: EigenSequence, N: int) -> np.ndarray:
    """(N + 1, d, d) stack of M_{0,n} / Lambda_n."""
    d = model.d
    out = np.empty((N + 1, d, d))
    current = np.eye(d)
    out[0] = current
    for n, A in enumerate(mean_matrices(model, 0, N)):
        current = current @ A / eigs.lam[n]
        out[n + 1] = current
    return out


def _log_gamma_terms(model: BranchingModel, eigs: EigenSequence, N: int) -> np.ndarray:
    """log of the k-th summand of 2 Gamma_n, k = 0..N-1."""
    cache: Dict[int, np.ndarray] = {}
    v, u = eigs.v, eigs.u
    inner = np.einsum("nd,nd->n", v, u)
    terms = np.empty(N)
    with np.errstate(divide="ignore"):
        for k in range(N):
            H = _hessians_at_one(model, k, cache)
            quadratic = np.einsum("a,jab,b->j", v[k + 1], H, v[k + 1])
            terms[k] = (
                np.log(quadratic @ u[k])
                - np.log(eigs.lam[k])
                - eigs.log_Lambda_tilde[k + 1]
                - np.log(inner[k + 1])
                - np.log(inner[k])
            )
    return terms


def _log_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log(e^a - e^b), nan where the difference is not positive."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(a > b, a + np.log(-np.expm1(b - a)), np.nan)


def _signed_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """e^a - e^b without forming e^a or e^b; overflows only when the difference does."""
    gap = np.abs(a - b)
    with np.errstate(divide="ignore", over="ignore"):
        magnitude = np.exp(np.maximum(a, b) + np.log(-np.expm1(-gap)))
    return np.sign(a - b) * magnitude


def series_table(model: BranchingModel, eigs: EigenSequence, N: int) -> SeriesTable:
    """
    Build the survival series Xi_n, Gamma_n, alpha(n, 0) and the survival curves.

    Args:
        model: The branching model.
        eigs: Eigen sequence of the same model covering at least N generations.
        N: Horizon (>= 1).

    Returns:
        SeriesTable: Every series over n = 0..N.
    """
    if N < 1:
        raise DomainError(f"horizon must be >= 1, got {N}")
    if eigs.horizon < N:
        raise DomainError(f"eigen sequence covers {eigs.horizon} generations, need {N}")
    if eigs.d != model.d:
        raise DomainError("eigen sequence and model differ in number of types")
    logger.info(f"Series table for '{model.name}' up to n={N}")

    log_Lambda = np.asarray(eigs.log_Lambda[: N + 1])
    log_Lambda_tilde = np.asarray(eigs.log_Lambda_tilde[: N + 1])

    # Step 1: Xi_n and Gamma_n as running log-sums
    log_Xi = np.full(N + 1, -np.inf)
    log_Xi[1:] = np.logaddexp.accumulate(-log_Lambda[1:])
    log_Gamma = np.full(N + 1, -np.inf)
    log_Gamma[1:] = np.logaddexp.accumulate(_log_gamma_terms(model, eigs, N)) + np.log(0.5)

    # Step 2: survival curves
    log_survival = log_survival_curve(model, N)

    # Step 3: alpha(n, 0) from <1 - f_{0,n}(0), u_0>^-1 - 1 / Lambda_tilde_n
    log_u0 = np.log(eigs.u0)
    log_mass = logsumexp(log_survival + log_u0[None, :], axis=1)
    log_alpha0 = _log_difference(-log_mass, -log_Lambda_tilde)
    log_alpha0[0] = -np.inf
    alpha0 = _signed_difference(-log_mass, -log_Lambda_tilde)
    alpha0[0] = 0.0

    # Step 4: convergence ratios
    v0, u0 = eigs.v[0], eigs.u0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gamma_ratio = np.exp(
            np.log(v0 @ u0) + log_survival + log_Gamma[:, None] - np.log(v0)[None, :]
        )
        rows = normalized_rows(model, eigs, N)
        u = np.asarray(eigs.u[: N + 1])
        expected = np.einsum("nji,ni->nj", rows, u)
        log_uu = np.log(np.einsum("nd,nd->n", u, u))
        size_ratio = np.exp(
            (log_Lambda_tilde + log_Gamma + log_uu - log_Lambda)[:, None]
            + log_survival
            - np.log(expected)
        )
    gamma_ratio[0] = np.nan
    size_ratio[0] = np.nan

    return SeriesTable(
        horizon=N,
        log_Xi=log_Xi,
        log_Gamma=log_Gamma,
        log_Lambda=log_Lambda,
        log_survival=log_survival,
        log_alpha0=log_alpha0,
        alpha0=alpha0,
        gamma_ratio=gamma_ratio,
        size_ratio=size_ratio,
        u0=np.asarray(u0),
    )


def alpha_eval(model: BranchingModel, eigs: EigenSequence, n: int, s) -> float:
    """
    alpha(n, s) = 1 / <1 - f_{0,n}(s), u_0> - 1 / (Lambda_tilde_n <1 - s, u_n>).

    Args:
        model: The branching model.
        eigs: Eigen sequence covering generation n.
        n: Generation (0 <= n <= eigs.horizon).
        s: Point of [0,1]^d other than 1.

    Returns:
        float: alpha(n, s).
    """
    if not 0 <= n <= eigs.horizon:
        raise DomainError(f"n={n} outside the eigen sequence horizon {eigs.horizon}")
    s = np.asarray(s, dtype=float)
    if s.shape != (model.d,):
        raise DomainError(f"s must have {model.d} components")
    if np.all(s == 1.0):
        raise DomainError("alpha(n, s) is undefined at s = 1")
    q = 1.0 - s
    complement = compose_complement(model, 0, n, q)
    first = 1.0 / float(complement @ eigs.u0)
    second = np.exp(-eigs.log_Lambda_tilde[n]) / float(q @ eigs.u[n])
    return float(first - second)


def survival_envelope(
    model: BranchingModel,
    eigs: EigenSequence,
    table: SeriesTable,
    initial: Optional[Sequence[float]] = None,
) -> dict:
    """
    Empirical constant C bounding E||Z_n|| / Lambda_n and P(Z_n != 0) Xi_n
    within [1/C, C] over n = 1..N.

    Args:
        model: The branching model.
        eigs: Its eigen sequence.
        table: Its series table.
        initial: Initial population; one particle of type 1 by default.

    Returns:
        dict: Ratio ranges and the implied constant C.
    """
    N = table.horizon
    z0 = np.eye(model.d)[0] if initial is None else np.asarray(initial, dtype=float)
    if z0.shape != (model.d,) or np.any(z0 < 0) or not z0.sum() > 0:
        raise DomainError("initial population must be a nonzero nonnegative d-vector")
    rows = normalized_rows(model, eigs, N)
    mean_ratio = np.einsum("j,nji->n", z0, rows)[1:]
    with np.errstate(divide="ignore", under="ignore"):
        log_extinct = np.log1p(-np.exp(table.log_survival)) @ z0
        log_alive = np.log(-np.expm1(log_extinct))
        survival_ratio = np.exp(log_alive + table.log_Xi)[1:]

    def band(values):
        low, high = float(np.min(values)), float(np.max(values))
        return low, high, max(high, 1.0 / low) if low > 0 else float("inf")

    m_low, m_high, m_c = band(mean_ratio)
    s_low, s_high, s_c = band(survival_ratio)
    return {
        "mean_ratio": [m_low, m_high],
        "survival_ratio": [s_low, s_high],
        "C": max(m_c, s_c),
    }
