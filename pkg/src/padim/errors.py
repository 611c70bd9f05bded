"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class PadimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PadimError):
    """Invalid or contradictory configuration (bad flags, bad parameters)."""


class DataError(PadimError):
    """Malformed or inconsistent input data (files, shapes, labels)."""


class NumericError(PadimError):
    """Numerical failure at runtime (factorization failure, non-finite results)."""
