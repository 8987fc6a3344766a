"""Exception hierarchy shared by all modules."""


class GrayZoneError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GrayZoneError, ValueError):
    pass


class DomainError(GrayZoneError, ValueError):
    pass


class IngestionError(GrayZoneError, ValueError):
    """Malformed waveform table. ``row`` is the 1-based line number, if known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericalError(GrayZoneError, ArithmeticError):
    pass


class SingularSystemError(NumericalError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class RegimeError(NumericalError):
    """Parameters outside the regime where a gray zone exists at all."""
