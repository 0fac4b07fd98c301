"""Exception hierarchy shared across the pipeline stages."""


class WifiTopoError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ValidationError(WifiTopoError, ValueError):
    """Input data violates a domain invariant."""


class ParseError(ValidationError):
    """A record could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParameterError(WifiTopoError, ValueError):
    """An argument is outside its allowed domain."""

    exit_code = 1


class ConfigurationError(WifiTopoError, ValueError):
    """Components were combined in an unsupported way."""

    exit_code = 1


class NumericError(WifiTopoError, ArithmeticError):
    """A quantity is undefined for the given inputs (e.g. log of zero)."""

    exit_code = 3


class NonOverlapError(NumericError):
    """Two distributions share no support where the measure needs overlap."""


class UndefinedCorrelationError(NumericError):
    """A correlation coefficient is undefined because one side is constant."""
