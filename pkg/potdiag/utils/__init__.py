"""A set of common utilities used across potdiag.

These submodules should not have any import-time dependencies on the rest of the package.
"""

from potdiag.utils.colorize import colorize
