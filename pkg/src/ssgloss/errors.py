"""Exception types shared across the package."""


class SsgLossError(Exception):
    """Base class for all errors raised by this package."""


class IoError(SsgLossError):
    """A file could not be read or written."""


class FormatError(SsgLossError):
    """A file exists but its encoding is unsupported or corrupt."""


class DimensionError(SsgLossError):
    """An image is too small for the requested operation."""


class BoundsError(SsgLossError):
    """A patch window exits the image."""


class ShapeMismatch(SsgLossError):
    """Two images that must share a shape do not."""


class ConfigMismatch(SsgLossError):
    """A mask was built with a different footprint than the config in use."""


class GraphMismatch(SsgLossError):
    """Two self-similarity graphs do not share centers and offsets."""


class InvalidCenter(SsgLossError):
    """A requested pixel is not an admissible SSG center."""
