"""Exception types shared across the package."""


class NetsymError(Exception):
    """Base class for all netsym errors."""


class ShapeMismatchError(NetsymError):
    """Operands have incompatible shapes or architectures."""


class TrainingDivergedError(NetsymError):
    """Training produced a non-finite loss or non-finite weights."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class MaskError(NetsymError):
    """Mask generation is infeasible or the retry budget was exhausted."""


class FitError(NetsymError):
    """A least-squares fit could not be carried out (rank-deficient design)."""


class InsufficientSamplesError(NetsymError):
    """A trace is too short for the requested statistic."""


class DegenerateSeriesError(NetsymError):
    """A series carries no usable signal (constant, all-zero, or point mass)."""


class FileFormatError(NetsymError):
    """A serialized artifact is malformed or has an unsupported version."""
