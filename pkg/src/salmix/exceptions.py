"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class BesselRangeError(OverflowError):
    """The Bessel argument left the range where K_nu can be represented."""


class AtShiftPoint(ValueError):
    """An observation coincides with a component shift, where the SAL density is unbounded.

    ``rows`` holds the offending row indices when evaluation was vectorized.
    """

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = rows


class EmptyComponent(RuntimeError):
    def __init__(self, message, component=None, soft_count=None):
        super().__init__(message)
        self.component = component
        self.soft_count = soft_count


class CovarianceRepairFailed(RuntimeError):
    pass


class MissingClassExamples(ValueError):
    pass


class UnsupportedDimension(ValueError):
    pass


class CsvFormatError(ValueError):
    """Malformed input CSV; ``line`` is the 1-based line number in the file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
