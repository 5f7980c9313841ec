"""Exception types raised across the package."""


class KdehmmError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSample(KdehmmError, ValueError):
    """A weighted sample has zero variance, so no bandwidth can be derived."""


class SequenceTooShort(KdehmmError, ValueError):
    """A sequence is too short to provide the model order's context."""


class RankDeficient(KdehmmError, ValueError):
    """Normal equations of a least-squares fit are singular."""


class EmptyState(KdehmmError, ValueError):
    """A hidden state received zero total occupancy mass at initialization."""


class NoCycleStructure(KdehmmError, ValueError):
    """Fewer than two oscillation peaks were found; phase cannot be defined."""


class NumericalFailure(KdehmmError, RuntimeError):
    """A likelihood or recursion became non-finite.

    Carries the time index or iteration at which the failure occurred,
    when known.
    """

    def __init__(self, message, index=None):
        if index is not None:
            message = f"{message} (at index {index})"
        super().__init__(message)
        self.index = index


class ConfigError(KdehmmError, ValueError):
    """An experiment or CLI configuration is invalid."""


class DataError(KdehmmError, ValueError):
    """An input data file is missing, empty, or fails to parse."""
