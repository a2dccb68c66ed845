"""Exception taxonomy shared across the package."""


class MprError(Exception):
    """Base class for all package errors."""


class ConfigError(MprError):
    """A configuration or layer-geometry invariant was violated."""


class ShapeError(MprError):
    """Runtime tensor/image shapes are incompatible."""


class UsageError(MprError):
    """An API was driven outside its contract (e.g. double backward)."""


class WeightFormatError(MprError):
    """Base class for weight-file load failures."""


class CorruptFileError(WeightFormatError):
    """Truncated payload, bad magic, failed CRC, or trailing garbage."""


class UnknownVersionError(WeightFormatError):
    """File declares a format version this build cannot read."""


class SchemaMismatchError(WeightFormatError):
    """Tensor names or shapes in the file disagree with its embedded config."""


class UnsupportedImageError(MprError):
    """Image file is not an 8-bit RGB PNG."""


class TrainingError(MprError):
    """Training step failed (e.g. non-finite gradient)."""
