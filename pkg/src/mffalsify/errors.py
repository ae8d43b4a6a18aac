"""Exception hierarchy shared across the package."""


class FalsifyError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FalsifyError):
    """An argument violates a documented precondition."""


class NumericFailureError(FalsifyError):
    """A linear-algebra or optimization step failed beyond recovery."""


class SimulationError(FalsifyError):
    """A simulator run failed; carries the fidelity index it happened at."""

    def __init__(self, message: str, fidelity: int | None = None):
        super().__init__(message)
        self.fidelity = fidelity
