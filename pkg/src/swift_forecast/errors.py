"""Exception hierarchy shared across the package.

Every error carries a short machine-parsable ``code`` that the CLI prints
as ``error[<code>]: message`` before exiting nonzero.
"""


class SwiftError(Exception):
    """Base class for all package errors."""

    code = "error"


class ConfigError(SwiftError):
    """Invalid or inconsistent configuration (bad key, bad value, missing key)."""

    code = "config"


class DataError(SwiftError):
    """Non-finite values, malformed CSV cells, or otherwise unusable data."""

    code = "data"


class ShapeError(SwiftError):
    """Dimension or length mismatch between arrays."""

    code = "shape"


class WaveletError(SwiftError):
    """Unsupported wavelet name or invalid filter coefficients."""

    code = "wavelet"


class CacheError(SwiftError):
    """Forward cache reused after it was consumed by a backward pass."""

    code = "cache"


class TrainError(SwiftError):
    """Training failures: empty splits, divergence, non-finite gradients."""

    code = "train"


class CheckpointError(SwiftError):
    """Corrupt, truncated, or incompatible checkpoint files."""

    code = "checkpoint"


class AnalysisError(SwiftError):
    """Degenerate inputs to the weight-analysis routines."""

    code = "analysis"
