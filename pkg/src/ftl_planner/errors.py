"""Exception types raised by the planner components."""


class FTLError(Exception):
    """Base class for all planner errors."""


class PreconditionError(FTLError, ValueError):
    pass


class BoundsError(FTLError, ValueError):
    """Configuration outside the model's sampling bounds."""


class DimensionError(FTLError, ValueError):
    """Shapes with different backbone discretizations were compared."""


class DegenerateProjection(FTLError, ArithmeticError):
    """A vector projected onto a rotation plane has (near) zero length."""


class EmptyLibrary(FTLError, ValueError):
    pass


class ConsistencyError(FTLError, ValueError):
    """A plan does not match the path it is evaluated against."""
