"""Exception hierarchy shared by all modules."""


class TnqError(Exception):
    """Base class for library errors."""


class ContractViolation(TnqError, ValueError):
    """An input broke a documented precondition (non-Hermitian, out of range, ...)."""


class InvalidPlanError(ContractViolation):
    """A reshape plan does not match the tensor shape."""


class ContractionError(ContractViolation):
    """Paired legs of a contraction have different dimensions."""


class ShapeMismatchError(ContractViolation):
    """Two objects that must share a register do not."""


class NumericError(TnqError, ArithmeticError):
    """A numerical routine failed (factorization, non-finite values, ...)."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})


class ImpossibleProjectionError(NumericError):
    """A forced measurement outcome has vanishing probability."""


class NotRepresentableError(ContractViolation):
    """The object cannot be expressed in the requested representation."""


class ResourceGuardError(TnqError):
    """The requested computation exceeds a configured resource limit."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
