"""Exception types shared by all storrel modules."""


class StorrelError(Exception):
    """Base class for all library errors."""


class ModelError(StorrelError, ValueError):
    """Invalid model description (bad rates, indices or dimensions)."""


class DimensionError(ModelError):
    """A model has no transient states or mismatched vector lengths."""


class SingularSystemError(StorrelError, ArithmeticError):
    """Absorption is unreachable from some transient state."""


class UnsupportedOrderError(StorrelError, ValueError):
    """A closed form was requested for a redundancy level it does not cover."""


class ConditionViolatedError(StorrelError, ValueError):
    """The hypothesis required by an exact evaluation mode does not hold."""


class NegativeRateError(ModelError):
    """A derived transition rate came out negative."""


class DegenerateDataError(StorrelError, ValueError):
    """Input samples cannot support the requested fit."""


class NoRootError(StorrelError, ArithmeticError):
    """The target function has no sign change on the search bracket."""


class OutOfRangeError(StorrelError, IndexError):
    """A request falls outside the validity range of a formula or index."""


class NoEventsError(StorrelError, ValueError):
    """Not enough simulated events of the requested kind for an estimate."""


class ParseError(StorrelError, ValueError):
    """Malformed input file; the message names the offending line."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RankDeficientError(ModelError):
    """A generator matrix does not have full row rank over GF(2)."""
