"""Exception types raised across the package."""


class NearFocusError(Exception):
    """Base class for all package errors."""


class DomainError(NearFocusError, ValueError):
    """A physical quantity is outside its admissible range."""


class DegenerateGeometry(NearFocusError, ValueError):
    """A receiver coincides (numerically) with a radiating element."""


class SingularMatrix(NearFocusError, ArithmeticError):
    """A linear system could not be factorized."""


class ConvergenceFailure(NearFocusError, RuntimeError):
    """An inner root-finding or iteration failed to converge."""


class DegenerateRetraction(NearFocusError, ArithmeticError):
    """A retraction would normalize a (near) zero entry."""


class LineSearchFailure(NearFocusError, RuntimeWarning):
    """Armijo backtracking exhausted its budget.

    Emitted as a warning; the optimizer returns its best point so far.
    """


class ParseError(NearFocusError, ValueError):
    """A scenario file could not be parsed."""


class ValidationError(NearFocusError, ValueError):
    """A scenario file parsed but violates a physical constraint."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
