from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.stats

from branchenv.model.branching_model import BranchingModel
from branchenv.simulate.ensemble import Ensemble
from branchenv.spectral.eigen_sequence import EigenSequence
from branchenv.tools.errors import DomainError, EmptyConditioningError


@dataclass(frozen=True, eq=False)
class ConditionedStats:
    """
    Survivor sample normalized by its mean.

    Attributes:
        samples: <zeta_n, u> / mean <zeta_n, u> over uncapped survivors.
        survival_frequency: Fraction of trajectories alive at the horizon.
        survivors: Number of survivors used.
        excluded_capped: Survivors left out because they hit the particle cap.
        raw_mean: Mean of <zeta_n, u> before normalizing.
        weights: The weight vector u.
    """

    samples: np.ndarray
    survival_frequency: float
    survivors: int
    excluded_capped: int
    raw_mean: float
    weights: np.ndarray

    def summary(self) -> dict:
        q = np.quantile(self.samples, [0.1, 0.25, 0.5, 0.75, 0.9])
        return {
            "survival_frequency": self.survival_frequency,
            "survivors": self.survivors,
            "excluded_capped": self.excluded_capped,
            "raw_mean": self.raw_mean,
            "sample_mean": float(self.samples.mean()),
            "sample_variance": float(self.samples.var()),
            "quantiles": dict(zip(["q10", "q25", "q50", "q75", "q90"], q.tolist())),
            "weights": self.weights.tolist(),
        }


def conditioned_stats(ensemble: Ensemble, u: Optional[Sequence[float]] = None) -> ConditionedStats:
    """
    Normalized survivor sizes <zeta_n, u> / E<zeta_n, u>.

    Args:
        ensemble: A nonempty ensemble.
        u: Positive weight vector; all ones by default.

    Returns:
        ConditionedStats: Samples with mean exactly 1 and the survival frequency.
    """
    if ensemble.R == 0:
        raise DomainError("ensemble is empty")
    u = np.ones(ensemble.d) if u is None else np.asarray(u, dtype=float)
    if u.shape != (ensemble.d,) or np.any(u <= 0):
        raise DomainError(f"weights must be a strictly positive {ensemble.d}-vector")
    survived = ensemble.survived
    usable = survived & ~ensemble.capped
    if not usable.any():
        raise EmptyConditioningError("conditioning event empty: no surviving trajectories")
    sizes = ensemble.terminal[usable] @ u
    mean = float(sizes.mean())
    return ConditionedStats(
        samples=sizes / mean,
        survival_frequency=float(survived.mean()),
        survivors=int(usable.sum()),
        excluded_capped=int((survived & ensemble.capped).sum()),
        raw_mean=mean,
        weights=u,
    )


def ks_exponential(samples) -> float:
    """
    Kolmogorov-Smirnov distance between the empirical CDF and 1 - e^{-x}.

    Args:
        samples: Nonempty sequence of nonnegative reals.

    Returns:
        float: Statistic in [0, 1].
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise DomainError("KS statistic needs at least one sample")
    if np.any(~np.isfinite(samples)) or np.any(samples < 0):
        raise DomainError("KS samples must be finite and nonnegative")
    return float(scipy.stats.kstest(samples, "expon").statistic)


def ensemble_moments(ensemble: Ensemble) -> dict:
    """
    Per-type means and covariance of the terminal states with standard errors.

    Returns:
        dict: mean, mean_se, cov, cov_se as numpy arrays.
    """
    R = ensemble.R
    if R < 2:
        raise DomainError("moments need at least two trajectories")
    x = ensemble.terminal.astype(float)
    mean = x.mean(axis=0)
    centered = x - mean
    products = centered[:, :, None] * centered[:, None, :]
    return {
        "mean": mean,
        "mean_se": x.std(axis=0, ddof=1) / np.sqrt(R),
        "cov": products.sum(axis=0) / (R - 1),
        "cov_se": products.std(axis=0, ddof=1) / np.sqrt(R),
    }


def type_proportions(ensemble: Ensemble) -> np.ndarray:
    """Survivor average of the normalized type vector Z_n / ||Z_n||."""
    survived = ensemble.survived
    if not survived.any():
        raise EmptyConditioningError("conditioning event empty: no surviving trajectories")
    z = ensemble.terminal[survived].astype(float)
    return (z / z.sum(axis=1, keepdims=True)).mean(axis=0)


def martingale_check(model: BranchingModel, eigs: EigenSequence, ensemble: Ensemble) -> dict:
    """
    Empirical moments of W_n = <Z_n, v_n> / Lambda_n along the stored traces.

    W_n has constant mean <Z_0, v_0>; its second moment stays bounded when the
    model survives with positive probability.

    Args:
        model: The simulated model.
        eigs: Eigen sequence covering the ensemble horizon.
        ensemble: Discrete ensemble run with traces.

    Returns:
        dict: target, mean, mean_se and second_moment per generation.
    """
    if ensemble.traces is None:
        raise DomainError("martingale check needs an ensemble with traces")
    n = int(ensemble.horizon)
    if eigs.horizon < n or eigs.d != model.d:
        raise DomainError(f"eigen sequence must cover {n} generations of a {model.d}-type model")
    traces = ensemble.traces.astype(float)
    w = np.einsum("rnd,nd->rn", traces, eigs.v[: n + 1]) * np.exp(-eigs.log_Lambda[: n + 1])
    return {
        "target": float(ensemble.initial @ eigs.v[0]),
        "mean": w.mean(axis=0),
        "mean_se": w.std(axis=0, ddof=1) / np.sqrt(ensemble.R) if ensemble.R > 1 else np.zeros(n + 1),
        "second_moment": (w**2).mean(axis=0),
    }
