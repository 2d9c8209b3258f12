"""Exception hierarchy shared across the engine.

ConfigError and DataError map onto the CLI exit codes 2 and 3.
"""


class LadError(Exception):
    """Base class for all engine errors."""


class ConfigError(LadError):
    """Invalid configuration or parameters (CLI exit code 2)."""


class DataError(LadError):
    """Invalid or inconsistent input data (CLI exit code 3)."""


class SltfError(DataError):
    """Base class for tensor container parse/write failures."""


class SltfBadMagic(SltfError):
    """File does not start with the container magic bytes."""


class SltfUnsupportedVersion(SltfError):
    """Container version byte is not supported."""


class SltfUnsupportedDtype(SltfError):
    """Dtype code byte is not one of the supported element types."""


class SltfTruncated(SltfError):
    """File ends before the declared payload is complete."""


class SltfShapeError(SltfError):
    """Shape header is invalid (bad rank, zero-length axis)."""


class SltfWriteError(SltfError):
    """I/O failure while writing a container file."""


class MaskValidationError(DataError):
    """Mask tensor violates the binary / non-empty page contract."""


class DegenerateObjectError(DataError):
    """An object mask became empty after resizing to feature resolution."""


class DegenerateDescriptorError(DataError):
    """A pooled object feature vector has zero norm."""
