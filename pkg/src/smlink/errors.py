"""Exception types shared across the package."""


class SmlinkError(Exception):
    """Base class for package errors."""


class ConfigurationError(SmlinkError, ValueError):
    """Invalid or unsupported configuration value."""


class FramingError(SmlinkError, ValueError):
    """Bit stream cannot be partitioned into whole symbol blocks / frames."""


class DimensionError(SmlinkError, ValueError):
    """Array argument has an incompatible shape."""


class RangeError(SmlinkError, ValueError):
    """Sample amplitude exceeds the quantizer full scale."""


class DegenerateInputError(SmlinkError, ValueError):
    """Input carries no usable signal (e.g. all-zero section)."""


class SyncRejection(SmlinkError, RuntimeError):
    """Synchronisation failed; the received vector must be discarded."""
