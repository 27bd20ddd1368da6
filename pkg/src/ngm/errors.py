"""Exception types shared across the package."""


class NgmError(Exception):
    """Base class for every error raised by this package."""


class FrozenVocabularyError(NgmError):
    """A new word was interned into a frozen vocabulary."""


class LengthMismatchError(NgmError):
    """An n-gram of the wrong length was offered to a store."""


class ArityError(NgmError):
    """A store function was applied with an argument count outside 1..N-1."""


class MalformedProgramError(NgmError):
    """A token sequence does not parse into a terminated program."""


class LengthOverflowError(NgmError):
    """A sequence exceeds the model's configured maximum length."""


class InvalidDimsError(NgmError):
    """Model dimensions are unusable (for example a zero-sized vocabulary)."""


class ShapeMismatchError(NgmError):
    """A gradient or parameter block has an unexpected shape."""


class NonFiniteGradientError(NgmError):
    """A gradient contained NaN or infinity."""


class EmptyBeamError(NgmError):
    """A store was to be sampled from an empty encoder beam."""


class EmptyDatasetError(NgmError):
    """An operation that needs at least one example received none."""


class UnsupportedTaskError(NgmError):
    """A task id outside the supported set was requested."""


class FormatError(NgmError):
    """A data file does not follow the expected text format."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConfigError(NgmError):
    """A run configuration contains unknown or invalid keys."""
