"""
Exception hierarchy. Each class carries the process exit code the CLI uses.
"""


class RoadsError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(RoadsError):
    """Invalid or conflicting configuration."""

    exit_code = 2


class DataError(RoadsError):
    """Dataset layout or content violates the loader contract."""

    exit_code = 3


class CheckpointError(DataError):
    """Checkpoint manifest and weights (or dataset) disagree."""


class NumericalError(RoadsError):
    """Non-finite loss or tensor during training."""

    exit_code = 4
