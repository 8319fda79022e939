"""Exceptions raised by specdetect.

Library code raises these; only the CLI turns them into process exit codes.
"""


class SpecDetectError(RuntimeError):
    """Base exception for all specdetect errors."""

    exit_code: int = 2


class ConfigError(SpecDetectError):
    """Raised when configuration or command-line input is missing or invalid."""

    exit_code = 1


class DataError(SpecDetectError):
    """Raised for malformed, inconsistent or out-of-range data."""

    exit_code = 2


class DimensionError(DataError):
    """Raised when a vector or matrix does not match its grid."""


class NumericalError(SpecDetectError):
    """Raised on singular systems or solver non-convergence."""

    exit_code = 3
