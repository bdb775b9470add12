"""
Exception hierarchy for the segmenter.

Library code raises these; the command layer maps them to exit codes and
hands them to the ErrorReporter.
"""


class SegmenterError(Exception):
    """Base class for every error raised by emrseg."""


class ConfigurationError(SegmenterError):
    """Invalid or unknown configuration value."""


class ValidationError(SegmenterError):
    """Input violates a documented precondition."""


class EmptyInputError(ValidationError):
    """Input carries nothing to process."""


class EmptyNoteError(EmptyInputError):
    """A note produced zero sentences."""


class EmptyCorpusError(EmptyInputError):
    """A corpus holds no notes or no tokens."""


class NoAnchorSectionError(SegmenterError):
    """A note has no heading that matches any section label."""

    def __init__(self, note_id: str):
        super().__init__(f"Note '{note_id}' has no heading matching a section label")
        self.note_id = note_id


class GrammarError(ConfigurationError):
    """Synthetic section grammar is invalid."""


class EmbeddingFormatError(SegmenterError):
    """Word-vector file cannot be parsed."""


class NumericalError(SegmenterError):
    """Training produced a non-finite value."""


class ModelIOError(SegmenterError):
    """Model or embedding container cannot be read or written."""


class ContainerFormatError(ModelIOError):
    """Bad magic bytes or malformed manifest."""


class ChecksumError(ModelIOError):
    """Trailing CRC-32 does not match the container contents."""


class VersionMismatchError(ModelIOError):
    """Container format version is not supported."""


class ShapeMismatchError(ModelIOError):
    """Tensor shapes disagree with the model or pipeline dimensions."""
