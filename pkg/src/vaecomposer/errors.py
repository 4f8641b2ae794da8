"""Exception types shared across the package."""


class VaecomposerError(Exception):
    """Base class for all domain errors raised by this package."""


class MalformedFile(VaecomposerError):
    """An input file (SMF bytes or text roll) violates its format."""


class EmptyAfterQuantization(VaecomposerError):
    """No notes remain inside the pitch band after quantization."""


class TooShort(VaecomposerError):
    """A piano roll is too short to yield a single window pair."""


class DimensionMismatch(VaecomposerError):
    """A vector or matrix does not have the expected shape."""


class StaleCache(VaecomposerError):
    """A forward cache does not match the parameters it is used with."""


class TooFewSongs(VaecomposerError):
    """A dataset split needs at least two songs."""


class NonFiniteLoss(VaecomposerError):
    """Training produced a NaN or infinite loss value."""


class FormatError(VaecomposerError):
    """A checkpoint file is corrupt or inconsistent with its header."""


class EmptyCounts(VaecomposerError):
    """Metrics requested over a confusion matrix with zero total cells."""


class IndexOutOfRange(VaecomposerError, IndexError):
    """A latent dimension index is outside [0, Z)."""
