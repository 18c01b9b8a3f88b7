"""Exception types raised by the registration pipeline."""


class ComregError(Exception):
    """Base class for pipeline errors."""


class RasterFormatError(ComregError):
    """Image file is unreadable, truncated, or has an unsupported layout."""


class WeightsFormatError(ComregError):
    """Weights file has a bad magic, shape mismatch, or checksum failure."""


class InsufficientCorrespondencesError(ComregError):
    """Fewer valid keypoint pairs than the estimator needs."""


class DegenerateGeometryError(ComregError):
    """Point configuration does not determine an affine transform."""


class TrainingDivergedError(ComregError):
    """Regressor training produced a non-finite loss."""
