"""Exception hierarchy shared by all smpkit modules."""


class SMPError(Exception):
    """Base class for every error raised by smpkit."""


class MismatchedSpace(SMPError, ValueError):
    pass


class Overflow(SMPError, ArithmeticError):
    pass


class UnboundedFunction(SMPError, ValueError):
    pass


class TruncationTooLoose(SMPError, ValueError):
    pass


class CompositionUnavailable(SMPError, TypeError):
    pass


class NegativeFunction(SMPError, ValueError):
    pass


class NotMonotone(SMPError, ValueError):
    pass


class OrderTooHigh(SMPError, ValueError):
    pass


class KernelUnavailable(SMPError, TypeError):
    pass


class DepthExceeded(SMPError, ValueError):
    pass


class NotFiberConstant(SMPError, ValueError):
    pass


class NotInCatalogue(SMPError, KeyError):
    pass


class FiberInconsistent(SMPError, ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotBijective(FiberInconsistent):
    pass


class CauchyBroken(FiberInconsistent):
    pass


class OutOfDomain(SMPError, ValueError):
    pass


class SideConditionViolated(SMPError, ValueError):
    def __init__(self, condition, message=""):
        super().__init__(f"{condition}: {message}" if message else condition)
        self.condition = condition


class UnsupportedSpace(SMPError, ValueError):
    pass


class TooManyCensored(SMPError, RuntimeError):
    pass


class InsufficientSamples(SMPError, ValueError):
    pass


class ConfigError(SMPError, ValueError):
    pass
