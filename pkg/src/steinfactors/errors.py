"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument fails a documented precondition."""


class CertificationError(RuntimeError):
    """A supremum over the unbounded index set could not be certified
    from the truncated range.

    Carries ``partial``: the maximum observed over the computed range.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SolverFailureError(RuntimeError):
    """The transportation simplex hit its pivot cap."""


class NumericFailureError(RuntimeError):
    """Quadrature or another numeric routine failed to converge."""


class ConstantViolationError(RuntimeError):
    """A scanned universal constant was violated at some lambda."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam
