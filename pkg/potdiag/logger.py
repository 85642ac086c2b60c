"""Set of functions for logging messages to standard error.

Library code never prints: numerical warnings (boundary estimates, failed fits) go through
:func:`warn` so they can be filtered or captured, and progress and per-cell diagnostics go
through :func:`info` and :func:`debug`.
"""
import sys
import warnings
from typing import Optional, Type, Union

from potdiag.utils import colorize

DEBUG = 10
INFO = 20
WARN = 30
ERROR = 40
DISABLED = 50

_LEVEL_NAMES = {
    "debug": DEBUG,
    "info": INFO,
    "warn": WARN,
    "warning": WARN,
    "error": ERROR,
    "disabled": DISABLED,
}

min_level = 30


warnings.filterwarnings("once", "", DeprecationWarning, module=r"^potdiag\.")


def set_level(level: Union[int, str]):
    """Set logging threshold on current logger, either as an integer level or a level name."""
    global min_level
    if isinstance(level, str):
        try:
            level = _LEVEL_NAMES[level.lower()]
        except KeyError:
            raise ValueError(
                f"Unknown logging level `{level}`, expected one of {sorted(_LEVEL_NAMES)}"
            )
    min_level = level


def level_from_verbosity(verbose: int = 0, quiet: bool = False) -> int:
    """Maps the command line ``-v`` count and ``-q`` flag onto a logging level."""
    if quiet:
        return ERROR
    if verbose >= 2:
        return DEBUG
    if verbose == 1:
        return INFO
    return WARN


def debug(msg: str, *args: object):
    """Logs a debug message to the user."""
    if min_level <= DEBUG:
        print(f"DEBUG: {msg % args}", file=sys.stderr)


def info(msg: str, *args: object):
    """Logs an info message to the user."""
    if min_level <= INFO:
        print(f"INFO: {msg % args}", file=sys.stderr)


def progress(label: str, done: int, total: int):
    """Logs ``done`` out of ``total`` completed tasks for a long-running computation."""
    if min_level <= INFO and total > 0:
        print(
            f"INFO: {label}: {done}/{total} ({100.0 * done / total:.0f}%)",
            file=sys.stderr,
        )


def warn(
    msg: str,
    *args: object,
    category: Optional[Type[Warning]] = None,
    stacklevel: int = 1,
):
    """Raises a warning to the user if the min_level <= WARN.

    Args:
        msg: The message to warn the user
        *args: Additional information to warn the user
        category: The category of warning
        stacklevel: The stack level to raise to
    """
    if min_level <= WARN:
        warnings.warn(
            colorize(f"WARN: {msg % args}", "yellow"),
            category=category,
            stacklevel=stacklevel + 1,
        )


def deprecation(msg: str, *args: object):
    """Logs a deprecation warning to users."""
    warn(msg, *args, category=DeprecationWarning, stacklevel=2)


def error(msg: str, *args: object):
    """Logs an error message if min_level <= ERROR in red on the sys.stderr."""
    if min_level <= ERROR:
        print(colorize(f"ERROR: {msg % args}", "red"), file=sys.stderr)
