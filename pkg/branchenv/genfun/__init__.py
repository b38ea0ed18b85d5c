from branchenv.genfun.composition import (
    compose_complement,
    compose_pgf,
    extinction_curve,
    log_survival_curve,
    skip_extinction_floor,
)
from branchenv.genfun.series import SeriesTable, alpha_eval, series_table, survival_envelope

__all__ = [
    "SeriesTable",
    "alpha_eval",
    "compose_complement",
    "compose_pgf",
    "extinction_curve",
    "log_survival_curve",
    "series_table",
    "skip_extinction_floor",
    "survival_envelope",
]
