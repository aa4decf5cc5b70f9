"""Exception hierarchy shared across the package."""


class ApeError(Exception):
    """Base class for all package errors."""


class DimensionError(ApeError, ValueError):
    pass


class ParameterError(ApeError, ValueError):
    pass


class ConfigError(ApeError, ValueError):
    pass


class FormatError(ApeError, ValueError):
    """Malformed input file (vocabulary, corpus, checkpoint, mapping)."""


class LengthError(ApeError, ValueError):
    """Sequence longer than the position table or the batch budget."""


class NumericError(ApeError, ArithmeticError):
    """Non-finite loss or gradient during training."""
