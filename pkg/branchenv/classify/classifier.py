from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from branchenv.genfun.series import SeriesTable, series_table
from branchenv.model.assumptions import validate_model
from branchenv.model.branching_model import BranchingModel, mean_matrices
from branchenv.spectral.eigen_sequence import eigen_sequence, perron_root
from branchenv.tools.errors import DomainError
from branchenv.tools.logger import Logger
from branchenv.tools.settings import Settings

logger = Logger("branchenv.classify")

# Uniform-criticality products are inspected over at most this many generations
UNICRIT_WINDOW = 512

# Largest growth of log b between the half and the full window that still counts as bounded
UNICRIT_DRIFT = 1e-6


class Verdict(str, Enum):
    SURVIVES = "SURVIVES"
    EXTINCT_EXPONENTIAL_LIMIT = "EXTINCT_EXPONENTIAL_LIMIT"
    EXTINCT_NO_EXPONENTIAL_LIMIT = "EXTINCT_NO_EXPONENTIAL_LIMIT"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class ClassificationReport:
    """
    Outcome of classifying a model.

    Attributes:
        verdict: Final verdict (exact whenever `exact` is True).
        exact: The verdict comes from the tail factor rho.
        heuristic_verdict: Verdict implied by the tail-increment ratios alone.
        horizon: Generations used for the numerical series.
        xi_ratio: (Xi_N - Xi_{N/2}) / Xi_N.
        lambda_xi_ratio: Same ratio for Lambda_n Xi_n.
        rho: Growth factor of Lambda over one tail repetition.
        log_rho: log rho.
        gamma_xi_ratio: Gamma_N / Xi_N.
        uniformly_critical: Mean products stay within [1/b, b] with b no longer growing over the window.
        tail: Tail description of the model.
        assumptions: Summary of the assumption report.
        u0: Initial backward vector used.
    """

    verdict: Verdict
    exact: bool
    heuristic_verdict: Verdict
    horizon: int
    xi_ratio: float
    lambda_xi_ratio: float
    rho: float
    log_rho: float
    gamma_xi_ratio: float
    uniformly_critical: bool
    tail: dict
    assumptions: dict = field(default_factory=dict)
    u0: Tuple[float, ...] = ()
    log_Xi_N: float = 0.0
    log_Lambda_N: float = 0.0

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "exact": self.exact,
            "heuristic_verdict": self.heuristic_verdict.value,
            "horizon": self.horizon,
            "xi_ratio": self.xi_ratio,
            "lambda_xi_ratio": self.lambda_xi_ratio,
            "rho": self.rho,
            "log_rho": self.log_rho,
            "gamma_xi_ratio": self.gamma_xi_ratio,
            "uniformly_critical": self.uniformly_critical,
            "tail": self.tail,
            "assumptions": self.assumptions,
            "u0": list(self.u0),
            "log_Xi_N": self.log_Xi_N,
            "log_Lambda_N": self.log_Lambda_N,
        }


def _tail_increment(log_values: np.ndarray, N: int) -> float:
    """(x_N - x_{N/2}) / x_N from log values."""
    return float(-np.expm1(log_values[N // 2] - log_values[N]))


def classify_series(table: SeriesTable, settings: Optional[Settings] = None) -> Tuple[Verdict, float, float]:
    """
    Verdict from the tail increments of Xi_n and Lambda_n Xi_n alone.

    Args:
        table: Series table over horizon N >= 2.
        settings: Thresholds; defaults when None.

    Returns:
        tuple: (verdict, Xi ratio, Lambda Xi ratio).
    """
    settings = settings or Settings()
    N = table.horizon
    if N < 2:
        raise DomainError(f"tail increments need a horizon >= 2, got {N}")
    xi_ratio = _tail_increment(table.log_Xi, N)
    lambda_xi_ratio = _tail_increment(table.log_Lambda + table.log_Xi, N)
    if xi_ratio < settings.xi_convergence_ratio:
        verdict = Verdict.SURVIVES
    elif lambda_xi_ratio < settings.xi_convergence_ratio:
        verdict = Verdict.EXTINCT_NO_EXPONENTIAL_LIMIT
    elif lambda_xi_ratio >= settings.xi_divergence_ratio:
        verdict = Verdict.EXTINCT_EXPONENTIAL_LIMIT
    else:
        verdict = Verdict.INCONCLUSIVE
    return verdict, xi_ratio, lambda_xi_ratio


def tail_factor(model: BranchingModel) -> float:
    """
    log of rho, the Perron root of the mean-matrix product over one repetition
    of the tail (a single matrix for repeat_last tails).
    """
    start = model.tail_start()
    product = np.eye(model.d)
    log_scale = 0.0
    for A in mean_matrices(model, start, start + model.tail_length()):
        product = product @ A
        total = product.sum()
        if not total > 0:
            return float("-inf")
        product = product / total
        log_scale += np.log(total)
    root, _ = perron_root(product)
    if root <= 0:
        return float("-inf")
    return float(log_scale + np.log(root))


def classify(
    model: BranchingModel,
    horizon: int = 4096,
    settings: Optional[Settings] = None,
    u0: Optional[Sequence[float]] = None,
) -> ClassificationReport:
    """
    Decide survival versus extinction with or without an exponential limit.

    The verdict is read from the tail factor rho: rho > 1 means Xi converges
    (SURVIVES), rho = 1 means Xi and Lambda Xi diverge (EXTINCT_EXPONENTIAL_LIMIT),
    rho < 1 means Xi diverges while Lambda Xi stays bounded
    (EXTINCT_NO_EXPONENTIAL_LIMIT). The tail-increment diagnostics over the
    horizon are reported alongside.

    Args:
        model: The branching model; Assumptions 1-3 must hold.
        horizon: Generations N used for the numerical series (>= 2).
        settings: Thresholds and tolerances.
        u0: Initial backward vector; uniform by default.

    Returns:
        ClassificationReport: Verdict and diagnostics.
    """
    settings = settings or Settings()
    if horizon < 2:
        raise DomainError(f"horizon must be >= 2, got {horizon}")
    logger.info(f"Classifying model '{model.name}' over horizon {horizon}")

    # Step 1: assumptions over one tail period
    report = validate_model(
        model,
        max(horizon, model.distinct_span()),
        floor=settings.assumption_floor,
        product_horizon=min(horizon, UNICRIT_WINDOW),
    )
    report.require((1, 2, 3))

    # Step 2: numerical series and the heuristic verdict
    eigs = eigen_sequence(
        model,
        horizon,
        u0=u0,
        tol=settings.spectral_tol,
        max_lookahead=settings.max_lookahead,
        floor=settings.assumption_floor,
        report=report,
    )
    table = series_table(model, eigs, horizon)
    heuristic, xi_ratio, lambda_xi_ratio = classify_series(table, settings)

    # Step 3: exact verdict from the tail factor
    log_rho = tail_factor(model)
    rho = float(np.exp(log_rho))
    if abs(rho - 1.0) <= settings.critical_tol:
        verdict = Verdict.EXTINCT_EXPONENTIAL_LIMIT
    elif rho > 1.0:
        verdict = Verdict.SURVIVES
    else:
        verdict = Verdict.EXTINCT_NO_EXPONENTIAL_LIMIT

    if heuristic != verdict:
        logger.warning(
            f"Model '{model.name}': tail-increment verdict {heuristic.value} differs from exact {verdict.value}"
        )

    result = ClassificationReport(
        verdict=verdict,
        exact=True,
        heuristic_verdict=heuristic,
        horizon=horizon,
        xi_ratio=xi_ratio,
        lambda_xi_ratio=lambda_xi_ratio,
        rho=rho,
        log_rho=log_rho,
        gamma_xi_ratio=float(np.exp(table.log_Gamma[horizon] - table.log_Xi[horizon])),
        uniformly_critical=bool(report.unicrit_drift <= UNICRIT_DRIFT),
        tail=model.tail.to_dict(),
        assumptions=report.summary(),
        u0=tuple(float(x) for x in eigs.u0),
        log_Xi_N=float(table.log_Xi[horizon]),
        log_Lambda_N=float(table.log_Lambda[horizon]),
    )
    logger.info(f"Model '{model.name}': verdict {verdict.value} (rho={rho:.12g})")
    return result
