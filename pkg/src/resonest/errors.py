"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any, Sequence


class ResonestError(Exception):
    """Base class for all errors raised by resonest."""


class InvalidArgumentError(ResonestError, ValueError):
    """A parameter or input violates an operation's precondition."""


class OutOfRangeError(InvalidArgumentError):
    """A curve-inversion target lies outside the sampled range."""

    def __init__(self, message: str, nearest: float):
        super().__init__(message)
        self.nearest = nearest


class ExcitationBandwidthError(InvalidArgumentError):
    """The incident spectrum is too weak somewhere in the requested band."""

    def __init__(self, message: str, frequencies: Sequence[float]):
        super().__init__(message)
        self.frequencies = list(frequencies)


class EstimationError(ResonestError):
    """Spectral estimation could not produce the requested modes.

    ``modes`` carries whatever was found so callers can report it.
    """

    def __init__(self, message: str, modes: Sequence[Any] = ()):
        super().__init__(message)
        self.modes = list(modes)


class IllConditionedError(EstimationError):
    """The signal subspace is degenerate for the configured model order."""

    def __init__(self, message: str, eigenvalues: Sequence[float]):
        super().__init__(message)
        self.eigenvalues = list(eigenvalues)
