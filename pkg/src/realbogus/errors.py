"""Exception hierarchy shared across the pipeline.

Grouped so the CLI can map failures onto distinct exit codes:
configuration problems, data problems, and numeric failures.
"""


class RealBogusError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(RealBogusError):
    """Invalid parameter, option, or incompatible configuration."""


class DimensionError(ConfigurationError):
    """Array shapes do not satisfy an operation's contract."""


class DataError(RealBogusError):
    """Malformed or inconsistent input data."""


class DegenerateImageError(DataError):
    """Constant image (sigma == 0); cannot be scaled or standardized."""


class FitsFormatError(DataError):
    """Malformed or unsupported FITS content."""


class ManifestError(DataError):
    """Malformed dataset manifest."""


class ModelFormatError(DataError):
    """Malformed, truncated, or corrupted model weight file."""


class NumericError(RealBogusError):
    """Numeric failure during computation (NaN loss, undefined metric...)."""


class UndefinedMetricError(NumericError):
    """Metric is undefined for the given input (e.g. one-class AUC)."""
