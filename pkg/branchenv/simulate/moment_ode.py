import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from branchenv.model.offspring_law import pgf_eval
from branchenv.simulate.ct_model import CTModel
from branchenv.tools.errors import DomainError
from branchenv.tools.logger import Logger

logger = Logger("branchenv.simulate")


@dataclass(frozen=True, eq=False)
class MomentPath:
    """First moments M(t) = E Z_t on a time grid."""

    times: np.ndarray
    means: np.ndarray

    def at(self, t: float) -> np.ndarray:
        """M(t) at a grid point."""
        index = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[index], t, rel_tol=0.0, abs_tol=1e-9):
            raise DomainError(f"t={t} is not a grid point of the moment path")
        return self.means[index]

    def csv_header(self) -> List[str]:
        return ["t"] + [f"M_{i + 1}" for i in range(self.means.shape[1])]

    def csv_rows(self) -> List[list]:
        return [[t] + m.tolist() for t, m in zip(self.times.tolist(), self.means)]


def segment_points(ct: CTModel, T: float, h: float, extra: Iterable[float] = ()) -> List[float]:
    """
    Sorted points 0 < ... < T at which the integration restarts: piece starts,
    the extra points and both ends.

    Raises DomainError when h exceeds the smallest gap between piece starts.
    """
    if not T > 0 or not h > 0:
        raise DomainError(f"need T > 0 and h > 0, got T={T}, h={h}")
    breaks = sorted({0.0, float(T), *ct.breakpoints(T)})
    smallest = min(b - a for a, b in zip(breaks, breaks[1:]))
    if h > smallest:
        raise DomainError(f"step h={h} is larger than the smallest breakpoint gap {smallest:g}")
    points = set(breaks) | {float(x) for x in extra if 0.0 < x < T}
    return sorted(points)


def rk4(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, length: float, h: float):
    """
    Classical fourth-order Runge-Kutta over an interval of the given signed length
    for an autonomous right-hand side; yields the state after every step.
    """
    steps = max(1, math.ceil(abs(length) / h - 1e-9))
    dt = length / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        yield dt, y


def moment_ode(
    ct: CTModel, T: float, h: float, initial: Optional[Sequence[float]] = None
) -> MomentPath:
    """
    Integrate M'(t) = B(t)^T M(t) with B(t)[j, i] = rho_t(j) (E X_j(i) - delta_ij).

    The grid restarts at every piece start and at every integer time.

    Args:
        ct: The continuous-time model.
        T: Final time (> 0).
        h: Largest step (<= smallest gap between piece starts).
        initial: M(0); one type-1 particle by default.

    Returns:
        MomentPath: Times and means, including every restart point.
    """
    points = segment_points(ct, T, h, extra=range(1, int(math.floor(T)) + 1))
    m = np.eye(ct.d)[0] if initial is None else np.asarray(initial, dtype=float)
    if m.shape != (ct.d,):
        raise DomainError(f"initial population must have {ct.d} components")
    times, means = [0.0], [m]
    for a, b in zip(points, points[1:]):
        Bt = ct.generator_matrix(0.5 * (a + b)).T
        t = a
        for dt, m in rk4(lambda y: Bt @ y, m, b - a, h):
            t += dt
            times.append(t)
            means.append(m)
        times[-1] = b
    logger.info(f"Moment ODE for '{ct.name}': {len(times) - 1} steps up to T={T}")
    return MomentPath(times=np.array(times), means=np.array(means))


def skeleton_mean_matrices(ct: CTModel, n: int, h: float) -> np.ndarray:
    """
    Mean matrices A_k of the unit-time skeleton Z_0, Z_1, ..., k < n.

    A_k[j, i] is the expected number of type-i particles at time k + 1 from one
    type-j particle at time k.
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    points = segment_points(ct, float(n), h, extra=range(1, n))
    matrices = []
    phi = np.eye(ct.d)
    for a, b in zip(points, points[1:]):
        Bt = ct.generator_matrix(0.5 * (a + b)).T
        for _, phi in rk4(lambda y: Bt @ y, phi, b - a, h):
            pass
        if math.isclose(b, round(b)):
            matrices.append(phi.T)
            phi = np.eye(ct.d)
    return np.array(matrices)


def skeleton_extinction(ct: CTModel, T: float, h: float) -> np.ndarray:
    """
    Survival probabilities P(Z_t != 0 | Z_0 = e_j) at integer times t = 0..floor(T).

    Integrates the backward equation phi'(s) = -rho_s(j) (g_s^j(phi) - phi_j)
    from phi(t) = 0 down to s = 0, for every target t at once.

    Args:
        ct: The continuous-time model.
        T: Largest time (>= 1).
        h: Largest step.

    Returns:
        np.ndarray: (floor(T) + 1, d) survival probabilities.
    """
    K = int(math.floor(T))
    if K < 1:
        raise DomainError(f"skeleton needs T >= 1, got {T}")
    points = segment_points(ct, float(K), h, extra=range(1, K))
    phi = np.zeros((K + 1, ct.d))
    for a, b in zip(points[::-1][1:], points[::-1][:-1]):
        index = ct.piece_index(0.5 * (a + b))
        rates = ct.rates_table[index]
        laws = ct.pieces[index].laws
        rows = np.arange(K + 1) >= b - 1e-9

        def pull(y):
            y = np.clip(y, 0.0, 1.0)
            g = np.stack([pgf_eval(law, y) for law in laws], axis=-1)
            return rates * (g - y)

        # pull = -phi', so stepping pull forward by b - a moves s from b down to a
        for _, phi_rows in rk4(pull, phi[rows], b - a, h):
            pass
        phi[rows] = np.clip(phi_rows, 0.0, 1.0)
    return 1.0 - phi


def inverse_mean_integral(
    ct: CTModel, T: float, h: float, initial: Optional[Sequence[float]] = None
) -> float:
    """Integral of 1 / ||E Z_t|| over [0, T] by the trapezoid rule on the moment path."""
    path = moment_ode(ct, T, h, initial)
    return float(trapezoid(1.0 / path.means.sum(axis=1), path.times))
