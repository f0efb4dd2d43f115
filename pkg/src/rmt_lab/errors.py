"""Exception types raised across the package."""


class RmtLabError(Exception):
    """Base class for all package errors."""


class BadParameter(RmtLabError, ValueError):
    pass


class NotPSD(RmtLabError, ValueError):
    pass


class BadSize(RmtLabError, ValueError):
    pass


class BadIndex(RmtLabError, IndexError):
    pass


class BadAddress(RmtLabError, ValueError):
    pass


class CapExceeded(RmtLabError):
    """An exact computation would exceed its enumeration or memory cap."""


class DegenerateVariance(RmtLabError, ValueError):
    pass


class EmptySample(RmtLabError, ValueError):
    pass


class TooFewSamples(RmtLabError, ValueError):
    pass


class TooSmallN(RmtLabError, ValueError):
    pass


class NoConvergence(RmtLabError, ArithmeticError):
    pass


class EvenPOnly(RmtLabError, ValueError):
    """Odd monomial degree requested where the CLT claim needs even p."""


class ConfigError(RmtLabError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UsageError(RmtLabError):
    pass
