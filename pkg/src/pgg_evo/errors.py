"""Exception types shared across the package."""


class PGGError(Exception):
    """Base class for all package errors."""


class DomainError(PGGError, ValueError):
    """An argument lies outside the domain of the operation."""


class DivergenceError(PGGError, ArithmeticError):
    """A repeated-game value is infinite for the requested parameters."""


class NumericError(PGGError, RuntimeError):
    """An iterative solver failed to converge.

    ``diagnostics`` carries whatever the solver knew when it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
