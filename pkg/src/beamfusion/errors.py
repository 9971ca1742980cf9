"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so every error raised across a
command boundary should be (a subclass of) one of the classes below.
"""


class BeamFusionError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamFusionError):
    """Invalid configuration: unknown keys, bad values, missing sections."""

    exit_code = 2


class DataError(BeamFusionError):
    """Invalid or missing data: malformed files, mismatched manifests."""

    exit_code = 3


class NumericError(BeamFusionError):
    """Numerical failure: NaN/Inf encountered, diverged training."""

    exit_code = 4
