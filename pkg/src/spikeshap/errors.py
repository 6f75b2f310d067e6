"""Exception hierarchy shared across the package.

Errors are grouped so the CLI can map them onto exit codes: configuration
problems (exit 1), data problems (exit 2), everything else (exit 3).
"""


class SpikeShapError(Exception):
    """Base class for all package errors."""


class ConfigError(SpikeShapError):
    """Invalid or inconsistent configuration."""


class DataError(SpikeShapError):
    """Problem with input data files or their contents."""


class EmptyFileError(DataError):
    """Input file contains no data rows."""


class MissingColumnError(DataError):
    """A column required by the schema is absent from the CSV."""


class DuplicateTimestampError(DataError):
    """The same timestamp appears more than once."""


class NonUniformGridError(DataError):
    """Timestamps do not align to the fixed five-minute grid."""


class UnfillableLeadingGapError(DataError):
    """Forward fill cannot fill a gap at the start of a channel."""


class MissingDataError(DataError):
    """Missing values remain where complete data is required."""


class SegmentTooShortError(SpikeShapError):
    """Segment has fewer than two intervals, so gradients are undefined."""


class SingleClassDatasetError(SpikeShapError):
    """Training data does not contain both classes."""


class InvalidHyperparamsError(SpikeShapError):
    """Forest hyperparameters are out of range."""


class DimensionMismatchError(SpikeShapError):
    """Query vector width does not match the trained feature count."""


class CorruptModelFileError(SpikeShapError):
    """Model file cannot be parsed or fails structural validation."""


class VersionMismatchError(SpikeShapError):
    """Model file was written by an incompatible format version."""


class MalformedTreeError(SpikeShapError):
    """Tree arrays are structurally invalid (cycles, bad children, bad values)."""


class TooManyFeaturesError(SpikeShapError):
    """Exact subset enumeration is limited to 20 features."""


class UnknownChannelError(SpikeShapError):
    """Feature name refers to a channel absent from the schema."""


class TooFewRowsError(SpikeShapError):
    """Fewer rows than clusters requested."""


class TooFewAxesError(SpikeShapError):
    """A radar chart needs at least three axes."""


class DegenerateSeriesWarning(UserWarning):
    """Percentile thresholds collapsed because the price series is constant."""


class ZeroVarianceWarning(UserWarning):
    """Zero-variance features were dropped before standardization."""
