"""Exception types shared across the toolkit."""


class BenthosError(Exception):
    """Base class for all toolkit errors."""


class FormatError(BenthosError):
    """A file violates its declared format (bad header fields, non-monotone grid, ...)."""


class CorruptFileError(BenthosError):
    """A payload is missing or its size disagrees with the header."""


class OutOfRangeError(BenthosError):
    """A requested value lies outside the supported domain (wavelength, timestamp, ...)."""


class IncompatibleGridError(BenthosError):
    """Two spectral quantities live on grids that cannot be combined."""


class DegenerateInputError(BenthosError):
    """An input is mathematically unusable (zero-norm spectrum, zero plate reflectance, ...)."""


class NoIntersectionError(BenthosError):
    """A projected ray does not hit the seafloor plane."""
