"""ANSI colouring for messages written to the terminal by :mod:`potdiag.logger`."""
import os
import sys
from typing import TextIO

color2num = dict(
    gray=30,
    red=31,
    green=32,
    yellow=33,
    blue=34,
    magenta=35,
    cyan=36,
    white=37,
)


def supports_color(stream: TextIO = sys.stderr) -> bool:
    """Returns if ``stream`` is an interactive terminal and ``NO_COLOR`` is unset."""
    if os.environ.get("NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def colorize(string: str, color: str, bold: bool = False, force: bool = False) -> str:
    """Returns string surrounded by terminal colour codes.

    Output that is redirected to a file is left uncoloured unless ``force`` is set, so that
    log files and captured warnings stay plain text.

    Args:
        string: The message to colourise
        color: One of gray, red, green, yellow, blue, magenta, cyan, white
        bold: If to bold the string
        force: Colour even when standard error is not a terminal

    Returns:
        Colourised (or unchanged) string
    """
    if not (force or supports_color()):
        return string
    attr = [str(color2num[color])]
    if bold:
        attr.append("1")
    attrs = ";".join(attr)
    return f"\x1b[{attrs}m{string}\x1b[0m"
