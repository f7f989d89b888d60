"""Exception hierarchy shared by every svdprune module."""


class SvdPruneError(Exception):
    """Base class for all library errors."""


class FormatError(SvdPruneError):
    """The file is not a well-formed NPY array."""


class DtypeError(SvdPruneError):
    """The array element type is not single or double precision real."""


class ShapeError(SvdPruneError, ValueError):
    """Array dimensions are inconsistent with the operation."""


class DataError(SvdPruneError, ValueError):
    """The array contains non-finite values."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IoError(SvdPruneError, OSError):
    """Reading or writing a file failed."""


class ParamError(SvdPruneError, ValueError):
    """A configuration value or argument is out of range."""


class DegenerateInputError(SvdPruneError, ValueError):
    """The input carries no variance (all-zero matrix)."""


class NumericalError(SvdPruneError, ArithmeticError):
    """An iterative kernel failed to converge."""
