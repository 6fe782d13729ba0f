"""
Exception hierarchy shared by every package module.

All errors derive from ``ValueError`` so callers that only know about
``ValueError`` keep catching them.
"""


class ContourRendError(ValueError):
    """Root of all errors raised by this package."""


class ShapeError(ContourRendError):
    """Raised when tensor, mask or feature-map shapes do not line up."""


class GeometryError(ContourRendError):
    """Raised for degenerate contours or raster sizes."""


class GradcheckError(ContourRendError):
    """Raised when the objective under finite differences is not finite."""


class ConfigError(ContourRendError):
    """Raised for unknown keys, unparseable values and invalid settings."""


class DatasetError(ContourRendError):
    """Raised for malformed dataset indexes or missing image files."""


class ImageFormatError(ContourRendError):
    """Raised when a PPM/PGM file has a bad magic number or dimensions."""


class CheckpointError(ContourRendError):
    """Base class for checkpoint decoding failures."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedRecordError(CheckpointError):
    pass


class TrainingError(ContourRendError):
    """Raised when training produces a non-finite loss."""


class EvaluationError(ContourRendError):
    """Raised for empty splits or checkpoint/dataset mismatches."""
