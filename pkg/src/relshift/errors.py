"""Exception hierarchy shared across the package."""


class RelshiftError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(RelshiftError, ValueError):
    """An argument violates a documented precondition."""


class TreeValidationError(RelshiftError, ValueError):
    """A tree fails a structural invariant (duplicate labels, no root, ...)."""


class NewickParseError(RelshiftError, ValueError):
    """Malformed Newick input; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SchemaError(RelshiftError, ValueError):
    """Labels or sample IDs of joined inputs do not line up."""


class DegenerateSampleError(RelshiftError, ValueError):
    """A sample row cannot be normalized to a composition."""


class AssumptionError(RelshiftError, ValueError):
    """A theory-mode assumption on the inputs does not hold."""


class NumericalError(RelshiftError, RuntimeError):
    """The solver produced a non-finite value."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration
