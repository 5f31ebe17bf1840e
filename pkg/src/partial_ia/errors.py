"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised for non-finite or otherwise malformed numerical input."""


class DimensionError(ValueError):
    """Raised when operands live in spaces of different dimension."""


class SizeLimitError(ValueError):
    """Raised when an exhaustive routine is asked to run beyond its guard."""


class InfeasibleNodeError(RuntimeError):
    """Raised when a node has no admissible subspace dimension."""


class NumericalError(RuntimeError):
    """Raised when a decomposition fails; the message names the link."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""
