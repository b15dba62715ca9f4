"""Exception hierarchy shared by every module."""


class GradFlowError(Exception):
    """Base class for all package errors."""


class InputError(GradFlowError, ValueError):
    """Malformed or inconsistent input (shapes, sample counts, normalization)."""


class DomainError(GradFlowError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class RangeError(GradFlowError, ValueError):
    """Evaluation point outside the admissible range (time grid, geodesic parameter)."""


class UnsupportedError(GradFlowError, TypeError):
    """The carrier does not provide an operation the caller asked for."""


class PreconditionError(GradFlowError, ValueError):
    """Scheme feasibility violated, e.g. 1 + tau*lambda <= 0."""


class NumericalError(GradFlowError, ArithmeticError):
    """Non-finite values produced by a user-supplied oracle."""


class SchemeError(GradFlowError, RuntimeError):
    """An inner proximal solve failed or a step was rejected.

    ``certificate`` carries the last step certificate, ``partial`` the
    trajectory built before the failure (when raised from a run).
    """

    def __init__(self, message, certificate=None, partial=None):
        super().__init__(message)
        self.certificate = certificate
        self.partial = partial
