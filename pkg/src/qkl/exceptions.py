"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class CapacityError(ValueError):
    """The requested object is too large to materialize."""


class SingularSystemError(ValueError):
    """A linear system is numerically singular and no ridge was given."""


class UndefinedAlignmentError(ValueError):
    """Alignment is undefined because the target vector vanishes."""


class DegenerateTargetError(ValueError):
    """The generated target function has (numerically) zero variance."""
