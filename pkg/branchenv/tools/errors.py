"""Exception hierarchy shared by every branchenv module."""


class BranchingError(Exception):
    """Base class for all errors raised by branchenv."""


class DomainError(BranchingError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModelValidationError(BranchingError, ValueError):
    """An offspring law, model or model file is malformed."""


class AssumptionError(BranchingError):
    """
    A non-degeneracy assumption required by an operation fails.

    Attributes:
        cell: The failing (n, j, i) cell, or None when not cell-specific.
        report: The AssumptionReport the failure was read from, if any.
    """

    def __init__(self, message: str, cell: tuple = None, report=None):
        super().__init__(message)
        self.cell = cell
        self.report = report


class SupportCapError(BranchingError):
    """A configured size cap (support atoms, look-ahead length) was exceeded."""

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class ParticleCapError(BranchingError):
    """A simulated population grew past the configured particle cap."""

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class EmptyConditioningError(BranchingError):
    """Conditioning on survival selected no trajectories."""
