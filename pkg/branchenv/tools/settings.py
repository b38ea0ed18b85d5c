from dataclasses import dataclass, asdict, fields, replace
from pathlib import Path

from dotenv import dotenv_values

from branchenv.tools.errors import ModelValidationError

ENV_PREFIX = "BRANCHENV_"


@dataclass(frozen=True)
class Settings:
    """
    Tunable defaults for every computation.

    Attributes:
        pmf_tol: Allowed deviation of a law's total mass from 1.
        derivative_tol: Tolerance of finite-difference cross-checks.
        mass_tol: Mass that skip_generations may truncate per law.
        support_cap: Maximum number of atoms in a skipped law.
        particle_cap: Maximum population of a simulated trajectory.
        spectral_tol: Target norm error of the forward vectors v_n.
        max_lookahead: Largest look-ahead the spectral construction may use.
        xi_convergence_ratio: Tail-increment ratio below which a series is treated as convergent.
        xi_divergence_ratio: Tail-increment ratio above which a series is treated as divergent.
        critical_tol: |rho - 1| at or below which a tail factor counts as critical.
        assumption_floor: Smallest probability bound accepted as positive.
        log_dir: Directory for log files.
    """

    pmf_tol: float = 1e-12
    derivative_tol: float = 1e-4
    mass_tol: float = 1e-9
    support_cap: int = 1_000_000
    particle_cap: int = 10_000_000
    spectral_tol: float = 1e-12
    max_lookahead: int = 100_000
    xi_convergence_ratio: float = 0.01
    xi_divergence_ratio: float = 0.1
    critical_tol: float = 1e-9
    assumption_floor: float = 1e-12
    log_dir: str = "logs"

    @classmethod
    def from_file(cls, path) -> "Settings":
        """
        Load settings from a dotenv-format file.

        Keys are the upper-cased field names with the BRANCHENV_ prefix,
        e.g. ``BRANCHENV_MASS_TOL=1e-8``.

        Args:
            path: Path to the settings file.

        Returns:
            Settings: Defaults overridden by the file's values.
        """
        path = Path(path)
        if not path.is_file():
            raise ModelValidationError(f"settings file not found: {path}")

        raw = dotenv_values(path)
        known = {f"{ENV_PREFIX}{f.name.upper()}": f for f in fields(cls)}
        overrides = {}
        for key, value in raw.items():
            if key not in known:
                raise ModelValidationError(f"unknown settings key '{key}' in {path}")
            field = known[key]
            overrides[field.name] = _coerce(field.name, value, field.type)

        return cls(**overrides)

    def with_overrides(self, **overrides) -> "Settings":
        """Return a copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> dict:
        """Settings as a plain dict, for provenance blocks."""
        return asdict(self)


def _coerce(name: str, value, type_name):
    """Convert a settings string to the field's declared type."""
    type_name = type_name if isinstance(type_name, str) else type_name.__name__
    if value is None:
        raise ModelValidationError(f"settings key for '{name}' has no value")
    try:
        if type_name == "int":
            return int(float(value))
        if type_name == "float":
            return float(value)
    except ValueError:
        raise ModelValidationError(
            f"settings value for '{name}' is not a {type_name}: {value!r}"
        ) from None
    return str(value)
