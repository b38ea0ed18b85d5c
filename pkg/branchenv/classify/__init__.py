from branchenv.classify.classifier import (
    UNICRIT_WINDOW,
    ClassificationReport,
    Verdict,
    classify,
    classify_series,
    tail_factor,
)

__all__ = [
    "UNICRIT_WINDOW",
    "ClassificationReport",
    "Verdict",
    "classify",
    "classify_series",
    "tail_factor",
]
