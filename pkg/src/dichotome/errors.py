"""Exception hierarchy shared by every dichotome module."""


class DichotomeError(Exception):
    """Base class for all library errors."""


class DomainError(DichotomeError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateGamma(DomainError):
    """gamma == 1: the dichotomy function is identically zero."""


class SingularPoint(DomainError):
    pass


class NoConvergence(DichotomeError, ArithmeticError):
    pass


class BranchMismatch(DomainError):
    """The requested value does not exist on the requested branch."""


class RecordMismatch(DichotomeError):
    """A transform record does not describe the image handed to ``invert``."""


class ImageTooSmall(DichotomeError, ValueError):
    pass


class GeometryMismatch(DichotomeError, ValueError):
    pass


class AlreadyGray(DichotomeError, ValueError):
    pass


class ConfigError(DichotomeError, ValueError):
    """Invalid run configuration (bad ranges, unknown keys, wrong version)."""
