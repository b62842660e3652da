"""Exception hierarchy for the codec.

Everything raised on purpose by this package derives from CodecError, so
callers (and the CLI) can catch one type. File-not-found conditions use the
builtin FileNotFoundError; other I/O failures surface as the builtin OSError.
"""


class CodecError(Exception):
    """Base class for all errors raised by chromacodec."""


class MalformedImage(CodecError):
    """Image file exists but cannot be parsed as the stated format."""


class UnsupportedBitDepth(CodecError):
    """Image uses a bit depth other than 8 bits per channel."""


class InvalidConfig(CodecError):
    """Network or training configuration violates its invariants."""


class ShapeMismatch(CodecError):
    """Array arguments do not have the dimensions the operation requires."""


class NonFiniteGradient(CodecError):
    """A gradient block contains NaN or infinity."""


class FormatVersionMismatch(CodecError):
    """Serialized file was written by an unknown format version."""


class CorruptWeights(CodecError):
    """Weights file fails its integrity hash or structural checks."""


class EmptyCorpus(CodecError):
    """Training was asked to run on zero images."""


class DivergedTraining(CodecError):
    """Training loss became non-finite."""


class InvalidSpec(CodecError):
    """Corpus spec violates its invariants."""


class IndexOutOfRange(CodecError):
    """A branch index is outside [0, K)."""


class EmptyRegion(CodecError):
    """A region map contains a label with no pixels."""


class InvalidParams(CodecError):
    """Segmentation or grid parameters violate their invariants."""


class ImageTooSmall(CodecError):
    """Image dimensions are below the minimum the operation supports."""


class EmptyAlphabet(CodecError):
    """Huffman table construction received no symbols."""


class SymbolOutOfAlphabet(CodecError):
    """A symbol outside the declared alphabet was passed to the entropy coder."""


class MalformedBitstream(CodecError):
    """Entropy-coded payload or container structure cannot be decoded."""


class NoFeasibleCandidate(CodecError):
    """No encoding strategy fits the requested byte budget / quality target."""


class ModelMismatch(CodecError):
    """Container was produced with a different model than the one supplied."""


class DimensionMismatch(CodecError):
    """Container header dimensions disagree with the supplied grayscale plane."""


class ChecksumMismatch(CodecError):
    """Container checksum does not validate."""
