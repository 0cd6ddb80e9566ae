"""Exception types raised by mmcompact."""

from __future__ import annotations


class MMCompactError(ValueError):
    """Base class for all domain errors raised by this package."""

    code = "error"


class SpaceError(MMCompactError):
    """A space specification does not describe a valid finite metric measure space."""

    code = "space"


class PreconditionError(MMCompactError):
    """An operation was called outside its domain (bad radius, empty set, ...)."""

    code = "precondition"


class NotShiftableError(MMCompactError):
    """Translation was requested on a space without a periodic shift step."""

    code = "not-shiftable"


class LipschitzBoundError(MMCompactError):
    """Partial data violates its declared Lipschitz bound.

    ``pair`` holds the offending point indices and ``quotient`` the measured
    difference quotient.
    """

    code = "lipschitz-bound"

    def __init__(self, message: str, pair: tuple[int, int], quotient: float):
        super().__init__(message)
        self.pair = pair
        self.quotient = quotient


class ParseError(MMCompactError):
    """An input file is unreadable, not JSON, or missing required fields."""

    code = "parse"
