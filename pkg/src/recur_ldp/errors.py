"""Exception hierarchy shared by every module of :mod:`recur_ldp`."""


class RecurLdpError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RecurLdpError, ValueError):
    """Input violates a documented constraint (CLI exit code 2)."""


class MalformedDocument(ValidationError):
    pass


class RowNotStochastic(ValidationError):
    pass


class NotIrreducible(ValidationError):
    pass


class AlphabetMismatch(ValidationError):
    pass


class AbsoluteContinuityViolated(ValidationError):
    pass


class UnsupportedModel(ValidationError):
    pass


class WordTooShort(ValidationError):
    pass


class CapTooSmall(ValidationError):
    pass


class UnknownFigure(ValidationError):
    pass


class InstanceTooLarge(RecurLdpError):
    """An exact enumeration would exceed the configured word budget (exit code 3)."""


class NumericalFailure(RecurLdpError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 4)."""


class NoConvergence(NumericalFailure):
    pass


class NoCycle(NumericalFailure):
    pass


class DegenerateFunction(NumericalFailure):
    pass


class NotBracketed(NumericalFailure):
    pass


class AllZeroCounts(NumericalFailure):
    """The Monte Carlo event was never observed.

    ``upper_bound`` holds a one-sided 95% bound (rule of three) on the
    event probability for every sample size used.
    """

    def __init__(self, message, upper_bound=None):
        super().__init__(message)
        self.upper_bound = upper_bound
