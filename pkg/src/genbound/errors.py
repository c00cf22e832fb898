"""Exception hierarchy shared by every genbound module."""


class GenBoundError(Exception):
    """Base class for all genbound errors."""


class DomainError(GenBoundError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedMethodError(GenBoundError):
    """The requested evaluation method does not apply to this problem."""


class NumericError(GenBoundError, ArithmeticError):
    """A numerical routine failed to converge or to bracket its target.

    ``diagnostics`` carries whatever state the routine had when it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class ResourceError(GenBoundError):
    """An exact enumeration would exceed its state budget."""


class InvariantViolation(GenBoundError, AssertionError):
    """A checked mathematical invariant failed."""
