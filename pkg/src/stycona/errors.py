"""Exception types shared across the package."""


class StyconaError(Exception):
    """Base class for all errors raised by stycona."""


class InvalidInput(StyconaError, ValueError):
    """Arguments violate an operation's preconditions."""


class NumericalFailure(StyconaError, ArithmeticError):
    """An iterative routine failed to converge or produced non-finite values."""


class FormatError(StyconaError, ValueError):
    """A file was readable but its content is malformed."""


class ImageIOError(StyconaError, OSError):
    """A file could not be read or written."""
