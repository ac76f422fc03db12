"""Exception types shared across the package.

Each error class carries the process exit code the CLI maps it to.
"""


class MomtomoError(Exception):
    exit_code = 1


class ConfigurationError(MomtomoError, ValueError):
    """Invalid discretization, phantom or run configuration."""

    exit_code = 2


class DataError(MomtomoError, ValueError):
    """Inconsistent or incomplete input data."""

    exit_code = 3


class AccuracyError(MomtomoError, RuntimeError):
    """A numerical self-check exceeded its threshold."""

    exit_code = 4


class AccuracyWarning(UserWarning):
    """Non-fatal accuracy concern (near-boundary targets, parity residuals)."""
