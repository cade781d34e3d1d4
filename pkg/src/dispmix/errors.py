"""Exception taxonomy.

Validation-style errors (bad parameters, degenerate inputs, mismatched
dimensions, bad configuration) map to CLI exit code 1; file-format errors map
to exit code 2.
"""


class DispmixError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(DispmixError):
    """A numeric parameter is out of range or non-finite."""


class DegenerateDistributionError(DispmixError):
    """A probability vector carries no usable mass (all zero or negative)."""


class DataError(DispmixError):
    """Inputs are structurally inconsistent (shape mismatch, bad label range,
    pixel sums outside tolerance)."""


class FormatError(DispmixError):
    """A serialized file violates its documented byte layout."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(DispmixError):
    """A configuration file or mapping contains unknown or invalid entries."""


class EmptyMixtureError(DispmixError):
    """No modes survived modeling and no valid label exists; the pixel must be
    masked by the caller."""


class UndefinedMetricError(DispmixError):
    """A metric was requested over zero valid pixels."""
