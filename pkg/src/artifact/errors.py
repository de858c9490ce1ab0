"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad parameters, malformed data or a domain violation."""


class NumericalError(RuntimeError):
    """A computation failed numerically (non-finite values, failed solves)."""
