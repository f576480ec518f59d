"""Shared exception types."""


class ValidationError(ValueError):
    """Invalid argument or inconsistent configuration."""


class DegeneratePatternError(ValidationError):
    """Pattern combination sums to zero everywhere; cannot be normalized."""


class NumericalError(ArithmeticError):
    """Non-finite values encountered during computation."""


class IngestionError(ValueError):
    """Source material could not be ingested."""
