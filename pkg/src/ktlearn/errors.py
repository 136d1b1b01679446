"""Exception types raised across the package.

Each class marks one failure mode a caller can reasonably branch on;
everything derives from :class:`KtlearnError` so a blanket except is
still possible at the CLI boundary.
"""


class KtlearnError(Exception):
    """Base class for all package-specific errors."""


# ---------------------------------------------------------------- datasets

class UnknownMagic(KtlearnError, ValueError):
    """IDX payload starts with a magic word this reader does not support."""


class TruncatedPayload(KtlearnError, ValueError):
    """IDX payload length disagrees with its declared dimensions."""


class BadChannelLayout(KtlearnError, ValueError):
    """Luma conversion asked for on data whose row count is not divisible by 3."""


# ----------------------------------------------------------------- kernels

class DimensionMismatch(KtlearnError, ValueError):
    """Operands disagree on the shared dimension."""


# ------------------------------------------------------------- transforms

class CholeskyFailure(KtlearnError, ArithmeticError):
    """The regularized scatter matrix was not positive definite.

    Signals a non-positive regularization weight or NaN contamination
    in the data.
    """


class SingularTransform(KtlearnError, ArithmeticError):
    """A gradient or objective was requested at a non-invertible transform."""


class NonFiniteObjective(KtlearnError, ArithmeticError):
    """NaN crept into the objective during alternation."""


class SampleCapExceeded(KtlearnError, ValueError):
    """Direct kernel fit refused because the Gram matrix would be too large."""


class RankExceedsN(KtlearnError, ValueError):
    """Requested eigenvector count exceeds the Gram matrix size."""


# ------------------------------------------------------------- evaluation

class EmptyTrainingSet(KtlearnError, ValueError):
    """Nearest-neighbour classification needs at least one training sample."""


class LengthMismatch(KtlearnError, ValueError):
    """Prediction and truth vectors differ in length."""


class EmptyInput(KtlearnError, ValueError):
    """Accuracy over zero samples is undefined."""


# ------------------------------------------------------------ model files

class BadMagic(KtlearnError, ValueError):
    """Model file does not start with the expected magic bytes."""


class VersionUnsupported(KtlearnError, ValueError):
    """Model file version is newer than this reader understands."""


class CorruptLength(KtlearnError, ValueError):
    """Model file ended mid-block or carries trailing garbage."""
