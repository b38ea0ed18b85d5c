from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from branchenv.model.assumptions import AssumptionReport, validate_model
from branchenv.model.branching_model import BranchingModel, mean_matrices
from branchenv.spectral.hilbert import certified_lookahead, contraction_bound, norm_bound
from branchenv.spectral.products import product_matrix
from branchenv.tools.errors import DomainError, SupportCapError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.spectral")


@dataclass(frozen=True, eq=False)
class EigenSequence:
    """
    Generalized Perron-Frobenius data of a model over generations 0..N.

    Attributes:
        horizon: N.
        v: (N + 1, d) forward vectors, l1-normalized, A_n v_{n+1} = lam_n v_n.
        u: (N + 1, d) backward vectors u_n = M_n^T u_0 / ||M_n^T u_0||.
        lam: (N + 1,) factors lam_n = ||A_n v_{n+1}||.
        lam_tilde: (N + 1,) factors lam_tilde_n = ||A_n^T u_n||.
        log_Lambda: (N + 1,) log of Lambda_n = lam_0 ... lam_{n-1}, log_Lambda[0] = 0.
        log_Lambda_tilde: (N + 1,) log of Lambda_tilde_n.
        alignment_error: Certified l1 bound on the error of each v_n.
        lookahead: Generations looked ahead past N to build v_N.
        R: Cone bound sqrt(K0)/epsilon0 used for the certificate.
        u0: The initial backward vector.
    """

    horizon: int
    v: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    log_Lambda: np.ndarray
    log_Lambda_tilde: np.ndarray
    alignment_error: float
    lookahead: int
    R: float
    u0: np.ndarray

    @property
    def d(self) -> int:
        return self.v.shape[1]

    @property
    def epsilon_bar(self) -> float:
        """Smallest component of any v_n or u_n over the horizon."""
        return float(min(self.v.min(), self.u.min()))

    @property
    def Lambda(self) -> np.ndarray:
        return np.exp(self.log_Lambda)

    @property
    def Lambda_tilde(self) -> np.ndarray:
        return np.exp(self.log_Lambda_tilde)

    def duality_constants(self) -> np.ndarray:
        """<v_n, u_n> Lambda_tilde_n / Lambda_n for n = 0..N."""
        inner = np.einsum("nd,nd->n", self.v, self.u)
        return inner * np.exp(self.log_Lambda_tilde - self.log_Lambda)

    def csv_header(self) -> List[str]:
        d = self.d
        return (
            ["n", "lambda", "lambda_tilde", "log_Lambda", "log_Lambda_tilde"]
            + [f"v_{i + 1}" for i in range(d)]
            + [f"u_{i + 1}" for i in range(d)]
            + ["alignment_error"]
        )

    def csv_rows(self) -> List[list]:
        rows = []
        for n in range(self.horizon + 1):
            rows.append(
                [n, self.lam[n], self.lam_tilde[n], self.log_Lambda[n], self.log_Lambda_tilde[n]]
                + self.v[n].tolist()
                + self.u[n].tolist()
                + [self.alignment_error]
            )
        return rows

    def summary(self) -> dict:
        return {
            "horizon": self.horizon,
            "lookahead": self.lookahead,
            "R": self.R,
            "alignment_error": self.alignment_error,
            "epsilon_bar": self.epsilon_bar,
            "u0": self.u0.tolist(),
            "log_Lambda_N": float(self.log_Lambda[-1]),
            "log_Lambda_tilde_N": float(self.log_Lambda_tilde[-1]),
        }


def default_u0(d: int) -> np.ndarray:
    return np.full(d, 1.0 / d)


def normalize_u0(u0: Optional[Sequence[float]], d: int) -> np.ndarray:
    """Check u0 is a positive d-vector and scale it to unit l1 norm."""
    if u0 is None:
        return default_u0(d)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (d,) or np.any(~np.isfinite(u0)) or np.any(u0 <= 0):
        raise DomainError(f"u0 must be a strictly positive {d}-vector, got {u0.tolist()}")
    return u0 / u0.sum()


def eigen_sequence(
    model: BranchingModel,
    N: int,
    u0: Optional[Sequence[float]] = None,
    tol: float = 1e-12,
    max_lookahead: int = 100_000,
    floor: float = 1e-12,
    report: Optional[AssumptionReport] = None,
) -> EigenSequence:
    """
    Compute v_n, u_n, lam_n, lam_tilde_n and the products Lambda_n, Lambda_tilde_n.

    The forward vectors come from one backward pass v_n = A_n v_{n+1} / lam_n
    started from the uniform vector at N + k, where the look-ahead k makes the
    Birkhoff contraction certificate fall below tol. The backward vectors come
    from the exact forward recursion u_{n+1} = A_n^T u_n / lam_tilde_n.

    Args:
        model: The branching model; Assumptions 1 and 3 must hold when d > 1.
        N: Horizon (>= 0).
        u0: Positive initial backward vector; uniform by default.
        tol: Target l1 error of every v_n.
        max_lookahead: Largest look-ahead allowed.
        floor: Probability floor for the assumption check.
        report: Precomputed assumption report covering every law of the model.

    Returns:
        EigenSequence: The sequences over 0..N.
    """
    if N < 0:
        raise DomainError(f"horizon must be >= 0, got {N}")
    if tol <= 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    d = model.d
    u0 = normalize_u0(u0, d)

    # Step 1: certificate and look-ahead
    if d == 1:
        R, k, alignment_error = 1.0, 1, 0.0
    else:
        if report is None:
            report = validate_model(
                model, max(N + 1, model.distinct_span()), floor=floor, product_horizon=1
            )
        report.require((1, 3))
        R = report.R
        k = certified_lookahead(R, tol, max_lookahead)
        if k > max_lookahead:
            raise SupportCapError(
                f"tol {tol:g} needs a look-ahead beyond the cap {max_lookahead} (R={R:.4g})",
                cap=max_lookahead,
            )
        alignment_error = norm_bound(contraction_bound(R, k))
    logger.info(
        f"Eigen sequence for '{model.name}': N={N}, look-ahead={k}, R={R:.4g}, error<={alignment_error:.3g}"
    )

    # Step 2: backward pass for v_n, lam_n
    matrices = mean_matrices(model, 0, N + k)
    v = np.empty((N + 1, d))
    lam = np.empty(N + 1)
    current = np.full(d, 1.0 / d)
    for n in range(N + k - 1, -1, -1):
        w = matrices[n] @ current
        norm = w.sum()
        if not norm > 0:
            raise DomainError(f"mean matrix at n={n} annihilates the positive cone")
        current = w / norm
        if n <= N:
            v[n] = current
            lam[n] = norm

    # Step 3: forward recursion for u_n, lam_tilde_n
    u = np.empty((N + 1, d))
    lam_tilde = np.empty(N + 1)
    u[0] = u0
    for n in range(N + 1):
        w = matrices[n].T @ u[n]
        norm = w.sum()
        if not norm > 0:
            raise DomainError(f"mean matrix at n={n} annihilates the positive cone")
        lam_tilde[n] = norm
        if n < N:
            u[n + 1] = w / norm

    with np.errstate(divide="ignore"):
        log_Lambda = np.concatenate([[0.0], np.cumsum(np.log(lam[:N]))])
        log_Lambda_tilde = np.concatenate([[0.0], np.cumsum(np.log(lam_tilde[:N]))])

    for array in (v, u, lam, lam_tilde, log_Lambda, log_Lambda_tilde):
        array.flags.writeable = False
    return EigenSequence(
        horizon=N,
        v=v,
        u=u,
        lam=lam,
        lam_tilde=lam_tilde,
        log_Lambda=log_Lambda,
        log_Lambda_tilde=log_Lambda_tilde,
        alignment_error=float(alignment_error),
        lookahead=k,
        R=float(R),
        u0=u0,
    )


def duality_drift(eigs: EigenSequence) -> float:
    """Largest deviation of <v_n, u_n> Lambda_tilde_n / Lambda_n from its value at n = 0."""
    constants = eigs.duality_constants()
    return float(np.max(np.abs(constants - constants[0])))


def alignment_profile(
    model: BranchingModel, eigs: EigenSequence, n: int, w: Sequence[float], ks: Sequence[int]
) -> List[Tuple[int, float]]:
    """
    How closely the normalized product M_{n,n+k} w lines up with v_n.

    Args:
        model: The branching model.
        eigs: EigenSequence containing generation n.
        n: Base generation.
        w: Positive starting vector.
        ks: Look-ahead lengths to test.

    Returns:
        list: (k, delta) pairs with delta = max_i |x_i / v_n(i) - 1|.
    """
    if not 0 <= n <= eigs.horizon:
        raise DomainError(f"n={n} outside the eigen sequence horizon {eigs.horizon}")
    w = np.asarray(w, dtype=float)
    if w.shape != (model.d,) or np.any(w <= 0):
        raise DomainError("w must be a strictly positive d-vector")
    profile = []
    for k in ks:
        x = product_matrix(model, n, n + k) @ w
        x = x / x.sum()
        profile.append((int(k), float(np.max(np.abs(x / eigs.v[n] - 1.0)))))
    return profile


def perron_root(matrix) -> Tuple[float, np.ndarray]:
    """
    Perron root and l1-normalized right eigenvector of a nonnegative matrix,
    from a dense eigensolver.

    Args:
        matrix: Square nonnegative matrix.

    Returns:
        tuple: (root, positive unit vector).
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f"perron_root needs a square matrix, got shape {matrix.shape}")
    if np.any(matrix < 0):
        raise DomainError("perron_root needs a nonnegative matrix")
    values, vectors = np.linalg.eig(matrix)
    index = int(np.argmax(values.real))
    vector = np.abs(vectors[:, index].real)
    total = vector.sum()
    if total > 0:
        vector = vector / total
    return float(values[index].real), vector
