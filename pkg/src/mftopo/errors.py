"""Exception types shared across the package.

The split matters for the service/CLI layer: input problems map to exit
code 2 (HTTP 400), everything else to exit code 3 (HTTP 500).
"""


class MFTopoError(Exception):
    """Base class for package errors."""


class InputDataError(MFTopoError):
    """A file or user-supplied value is malformed or inconsistent."""


class ConfigError(MFTopoError):
    """A run configuration violates its contract (weights, counts, ...)."""
