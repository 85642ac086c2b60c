"""Set of Error classes for potdiag.

Every class carries an ``exit_code`` read by the command line frontend: 2 for usage errors,
3 for data and parsing errors, 4 for numerical failures.
"""
from typing import Optional


class Error(Exception):
    """Error superclass."""

    exit_code = 1


# Registry errors


class Unregistered(Error):
    """Raised when the user requests an item from the registry that does not actually exist."""

    exit_code = 2


class NameNotFound(Unregistered):
    """Raised when the user requests a process kind that is not registered."""


class RegistrationError(Error):
    """Raised when the user attempts to register an invalid process, e.g. a duplicate alias."""

    exit_code = 2


# Usage errors


class InvalidParameter(Error, ValueError):
    """Raised when an argument lies outside its domain, e.g. a probability outside (0, 1)."""

    exit_code = 2


class DomainError(InvalidParameter):
    """Raised when a likelihood quantity is evaluated at a parameter outside (0, 1)."""


# Data errors


class DataError(Error):
    """Raised when the input data cannot support the requested computation."""

    exit_code = 3


class ParseError(DataError):
    """Raised when a row of an input file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        """Initialises the parse error, prefixing the message with the physical line number."""
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(DataError):
    """Raised when there are too few observations, exceedances, gaps or years."""


class NoExceedancesError(InsufficientDataError):
    """Raised when no observation lies strictly above the threshold."""


class DegenerateScaleError(DataError):
    """Raised when a scale estimate is zero, e.g. a zero median absolute deviation."""


class NoWindowError(DataError):
    """Raised when no full sliding window fits inside the series."""


# Numerical errors


class NumericalError(Error):
    """Numerical failure superclass."""

    exit_code = 4


class ConvergenceError(NumericalError):
    """Raised when an optimiser or root finder fails to converge."""


class UndefinedTestError(NumericalError):
    """Raised when the information matrix test is undefined: boundary estimate or zero variance."""
