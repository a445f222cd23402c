"""Exception hierarchy shared by all latseq modules."""


class LatseqError(Exception):
    """Base class for all errors raised by this package."""


class DataError(LatseqError):
    """Problems with user-supplied data (corpora, lattice files, checkpoints).

    CLI commands translate this family into exit code 2.
    """


class MismatchError(DataError):
    """A tokenization does not concatenate back to its character sequence."""


class EmptyInputError(LatseqError):
    """An operation received an empty collection where at least one item is required."""


class ParseError(DataError):
    """Malformed lattice text input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class DimensionError(LatseqError):
    """Operands have incompatible shapes."""


# The optimizer-facing alias; same condition, different call sites.
ShapeError = DimensionError


class TopologyError(LatseqError):
    """A plain GRU was asked to encode a node with more than one incoming edge."""


class StateError(LatseqError):
    """Backward pass invoked without the recorded forward intermediates."""


class EmptyCorpusError(DataError):
    """Vocabulary construction saw no tokens at all."""


class FormatError(DataError):
    """Corrupt or truncated checkpoint container."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = "offset %d: %s" % (offset, message)
        super().__init__(message)
        self.offset = offset


class VersionError(DataError):
    """Checkpoint format version not understood by this build."""


class FingerprintError(DataError):
    """Checkpoint was trained against different vocabularies."""


class SpecError(DataError):
    """Inconsistent synthetic-task specification."""


class LengthMismatchError(DataError):
    """Hypothesis and reference files differ in line count."""
