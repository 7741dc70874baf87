"""Exception types shared across the package."""


class NswError(Exception):
    """Base class for all package errors."""


class ParseError(NswError, ValueError):
    """Malformed input row; ``line`` is 1-based (0 when unknown)."""

    def __init__(self, message, line=0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class FormatError(ParseError):
    """Broker statement does not follow the expected layout."""


class UnknownTypeError(FormatError):
    pass


class OrderError(NswError, ValueError):
    """Timestamps are not strictly increasing."""


class EmptyInputError(NswError, ValueError):
    pass


class DomainError(NswError, ValueError):
    pass


class LengthError(NswError, ValueError):
    pass


class ShapeError(NswError, ValueError):
    pass


class DimensionError(NswError, ValueError):
    pass


class RankError(NswError, ValueError):
    """Least-squares design matrix is rank deficient."""


class DensityOverflowError(NswError, OverflowError):
    """Exponent range of the stationary density is too wide for the grid."""


class DegenerateError(NswError, ValueError):
    pass


class RangeError(NswError, ValueError):
    pass


class GridError(NswError, ValueError):
    pass


class InsufficientDataError(NswError, ValueError):
    pass


class NonFiniteError(NswError, ValueError):
    pass


class EmptyStatementError(NswError, ValueError):
    pass


class EmptyPeriodError(NswError, ValueError):
    pass


class AlignmentError(NswError, ValueError):
    pass


class ConfigError(NswError, ValueError):
    pass
