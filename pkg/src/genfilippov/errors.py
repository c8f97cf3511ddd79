"""Exception hierarchy shared by all modules."""


class FilippovError(Exception):
    """Base class for every error raised by this package."""


class SingularTime(FilippovError):
    pass


class UndefinedPoint(FilippovError):
    pass


class OnSurface(FilippovError):
    pass


class NotAttractive(FilippovError):
    pass


class Degenerate(FilippovError):
    pass


class StepUnderflow(FilippovError):
    pass


class StepBudget(FilippovError):
    pass


class NoSignChange(FilippovError):
    pass


class InsufficientSamples(FilippovError):
    pass


class GapInDomain(FilippovError):
    pass


class LimitMismatch(FilippovError):
    pass


class InvalidTrajectory(FilippovError):
    pass


class TooSparse(FilippovError):
    pass


class OutOfDomain(FilippovError):
    pass


class IntervalTouchesSingularity(FilippovError):
    pass


class InvalidConfig(FilippovError, ValueError):
    pass
