class CDEError(Exception):
    """Base class for all package errors."""


class InputError(CDEError, ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad file, ...)."""


class ConfigurationError(CDEError, ValueError):
    """Unsupported parameters, e.g. a field too small for the selection policy."""


class BudgetError(ConfigurationError):
    """An exhaustive oracle was asked to enumerate beyond its size budget."""


class InvariantError(CDEError, RuntimeError):
    """A mechanism invariant failed; carries whatever context was available."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class NotRationalError(CDEError, ValueError):
    """A rate-payment pair that must be rational is not."""
