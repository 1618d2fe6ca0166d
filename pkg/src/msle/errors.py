class MsleError(Exception):
    """Base class for library errors."""


class InvalidPatternError(MsleError, ValueError):
    pass


class ConfigurationError(MsleError, ValueError):
    """Marked points are not strictly increasing, not finite, or the wrong count."""


class CapacityError(MsleError):
    """A requested size exceeds an enumeration or brute-force cap."""


class CancellationError(MsleError, ArithmeticError):
    """A signed sum lost too many digits to be trusted."""


class ConvergenceError(MsleError, ArithmeticError):
    pass
