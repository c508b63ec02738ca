"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: malformed spec, allocation, prior or config."""


class EstimabilityError(RuntimeError):
    """The model cannot be estimated with the given weights/support."""


class NumericalError(RuntimeError):
    """Internal numerical inconsistency (e.g. determinant far below zero)."""


class OracleInfeasibleError(RuntimeError):
    """The brute-force determinant expansion would exceed the term cap."""
