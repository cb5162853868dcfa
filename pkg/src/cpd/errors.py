"""Exception types shared across the package.

The CLI maps these onto process exit codes: ``ValidationError`` -> 2,
``SolverError`` -> 3 (coverage assertion failures use 4 directly).
"""


class CpdError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CpdError):
    """Invalid input, malformed file, or violated method precondition."""


class EmptySetError(ValidationError):
    """Set-distance requested for an empty index set."""


class SolverError(CpdError):
    """An iterative solver failed to reach its tolerance."""
