"""Exception types shared across the package.

The CLI maps these onto stable exit codes: any :class:`RelcompError`
except :class:`DivergenceError` is an input/data error (exit 2);
:class:`DivergenceError` signals numerical divergence during training
(exit 3).
"""


class RelcompError(Exception):
    """Base class for every error raised by this package."""


class EmbeddingLoadError(RelcompError):
    """An embedding text file violates the expected format."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ZeroVarianceError(RelcompError):
    """A dimension has zero variance, so 1/sigma scaling is undefined."""

    def __init__(self, dimensions):
        dims = list(dimensions)
        super().__init__(
            "zero-variance embedding dimension(s): " + ", ".join(map(str, dims))
        )
        self.dimensions = dims


class UnknownWordError(RelcompError):
    """A word was looked up that is not in the vocabulary."""

    def __init__(self, word):
        super().__init__(f"word not in vocabulary: {word!r}")
        self.word = word


class DimensionMismatchError(RelcompError):
    """Vector, matrix, or operator dimensionalities disagree."""


class UnsupportedModeError(RelcompError):
    """An operation requires a different operator constraint mode."""


class DataError(RelcompError):
    """Relation-group or benchmark data is malformed or insufficient."""


class DivergenceError(RelcompError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch, value):
        super().__init__(
            f"non-finite training loss ({value!r}) at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch
