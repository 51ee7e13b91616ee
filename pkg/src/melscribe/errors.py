"""Exception types raised by this package.

Every error deliberately raised by melscribe derives from
:class:`MelscribeError`, so callers (including the CLI) can separate
domain failures from genuine bugs.
"""


class MelscribeError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(MelscribeError):
    """A value (pitch, beat position, octave shift, ...) is out of range."""


class OrderingError(MelscribeError):
    """A sequence that must be (strictly) increasing is not."""


class ParseError(MelscribeError):
    """Malformed annotation input; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ShapeError(MelscribeError):
    """Array dimensions do not match their contract."""


class FormatError(MelscribeError):
    """A binary or JSON file does not follow its documented layout."""


class CoverageError(MelscribeError):
    """Feature frames do not cover the requested sixteenth-note grid."""


class InputError(MelscribeError):
    """Inputs violate a documented precondition."""


class InsufficientBeatsError(MelscribeError):
    """The beat grid runs out of beats after the chosen downbeat."""

    def __init__(self, message: str, available: int):
        super().__init__(message)
        self.available = available
