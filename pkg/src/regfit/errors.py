"""Exception types shared across the toolkit.

Two failure categories exist: bad inputs (shapes, ranges, malformed files)
and numerical breakdown (singular systems, failed factorizations). The CLI
maps them to exit codes 1 and 2 respectively.
"""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra operation breaks down numerically."""
