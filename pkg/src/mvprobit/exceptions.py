"""Exception hierarchy shared by the estimation modules and the CLI."""


class MvProbitError(Exception):
    """Base class for all package errors."""


class InputError(MvProbitError, ValueError):
    """Malformed data or configuration (CLI exit code 2)."""


class EstimationError(MvProbitError):
    """A stage of the estimator failed (CLI exit code 3).

    ``stage`` is 1 or 2; ``where`` names the component index or the
    ``(j, k)`` pair that failed.
    """

    def __init__(self, message, stage=None, where=None, diagnostics=None):
        super().__init__(message)
        self.stage = stage
        self.where = where
        self.diagnostics = diagnostics or {}


class RankDeficiencyError(EstimationError):
    pass


class SeparationError(EstimationError):
    pass


class ConvergenceError(EstimationError):
    pass


class NumericError(MvProbitError, ArithmeticError):
    """Singular or non-finite matrices in variance assembly (CLI exit code 4)."""
