"""
Error Utilities

This module defines the exception hierarchy shared by every stage of the
ear verification pipeline. Each exception carries the process exit code the
command-line tool returns when it escapes, grouped in families:

 - 2 usage (bad flags or configuration)
 - 3 io (missing or unwritable files)
 - 4 data (inputs that parse but cannot be processed, or do not parse)
 - 5 internal (an invariant the code itself should guarantee was broken)
"""


class EarSiftError(Exception):
    """Base class of all errors raised by ear_sift."""

    exit_code: int = 5


class UsageError(EarSiftError):
    exit_code = 2


class ConfigError(UsageError):
    """Unknown configuration key, unparsable value or out-of-range value."""


class IoFailure(EarSiftError):
    exit_code = 3


class ImageFileNotFound(IoFailure):
    """The image, mask, template or manifest path does not exist."""


class DataError(EarSiftError):
    exit_code = 4


class UnsupportedFormat(DataError):
    """The file is neither PNG nor binary PPM/PGM."""


class CorruptData(DataError):
    """The file announces a supported format but its payload is unreadable."""


class DimensionMismatch(DataError):
    pass


class EmptyMask(DataError):
    pass


class TooFewSamples(DataError):
    """Not enough pixels to build the requested codebook or mixture."""


class ImageTooSmall(DataError):
    pass


class EmptyTemplate(DataError):
    """No keypoint survived extraction and region gating (no features)."""


class ParseFailure(DataError):
    """A template, manifest or model file is malformed."""


class OverlapDetected(DataError):
    """Calibration and evaluation manifests share subjects or images."""


class EmptyScores(DataError):
    pass


class InternalInvariantError(EarSiftError):
    exit_code = 5


class SingularCovariance(InternalInvariantError):
    """A covariance matrix failed its Cholesky factorization."""
