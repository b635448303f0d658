"""Exception and warning classes raised across the package."""


class HierSalError(Exception):
    """Base class for all package errors."""


class ImageIOError(HierSalError, OSError):
    """An image file is missing or cannot be read."""


class ImageFormatError(HierSalError, ValueError):
    """An image file exists but cannot be decoded."""


class RangeError(HierSalError, ValueError):
    """A numeric argument lies outside its admissible range."""


class DimensionError(HierSalError, ValueError):
    """Two arrays that must share a shape do not."""


class KindMismatch(HierSalError, TypeError):
    """Two region models of different kinds were combined."""


class EmptyGroundTruth(HierSalError, ValueError):
    """A ground-truth mask has no foreground pixels."""


class MissingPair(HierSalError, FileNotFoundError):
    """A saliency map has no matching ground-truth file (or vice versa)."""


class ConfigError(HierSalError, ValueError):
    """A run configuration is invalid."""


class NonConvergenceWarning(RuntimeWarning):
    """Loopy message passing hit its iteration cap before converging."""
