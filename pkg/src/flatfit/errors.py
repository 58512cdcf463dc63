"""Exception types shared across the package."""


class FlatfitError(Exception):
    """Base class for all errors raised by flatfit."""


class DimensionMismatchError(FlatfitError, ValueError):
    """Inputs live in spaces of different dimension."""


class DegenerateError(FlatfitError, ValueError):
    """A geometric construction is undefined for the given input.

    Raised for a zero rotation axis, a rank-deficient path, a slab of zero
    width, or a constant sample in a coefficient-of-variation computation.
    """


class InvalidParameterError(FlatfitError, ValueError):
    """A parameter is outside its admissible range."""


class ResourceLimitError(FlatfitError, RuntimeError):
    """An enumeration would exceed its configured cap."""


class ParseError(FlatfitError, ValueError):
    """An input file could not be read as a point set."""
