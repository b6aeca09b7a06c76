"""Exception taxonomy shared across the package.

Every error raised by the engine derives from :class:`LeastCoreError` so
callers can catch the whole family; most also derive from the closest
builtin (ValueError, RuntimeError, ...) for idiomatic handling.
"""


class LeastCoreError(Exception):
    """Base class for all errors raised by this package."""


class IndexOutOfRange(LeastCoreError, ValueError):
    pass


class DuplicateIndex(LeastCoreError, ValueError):
    pass


class NotAntichain(LeastCoreError, ValueError):
    pass


class EmptyMwcList(LeastCoreError, ValueError):
    pass


class InvalidExponent(LeastCoreError, ValueError):
    pass


class OddN(LeastCoreError, ValueError):
    pass


class CacheReadError(LeastCoreError, OSError):
    pass


class CacheWriteError(LeastCoreError, OSError):
    pass


class CacheMiss(LeastCoreError, KeyError):
    pass


class ParseError(LeastCoreError, ValueError):
    pass


class InvariantViolation(LeastCoreError, ValueError):
    pass


class TooLarge(LeastCoreError, ValueError):
    pass


class Infeasible(LeastCoreError, RuntimeError):
    pass


class NumericalFailure(LeastCoreError, RuntimeError):
    pass


class InvalidProbability(LeastCoreError, ValueError):
    pass


class NotBinary(LeastCoreError, ValueError):
    pass


class NotMonotone(LeastCoreError, ValueError):
    pass


class DegenerateCut(LeastCoreError, RuntimeError):
    pass


class FailureNoFeasible(LeastCoreError, RuntimeError):
    pass


class BudgetExceeded(LeastCoreError, RuntimeError):
    """Internal signal: a value-oracle miss would overrun the call budget."""


class EmptyHoldout(LeastCoreError, ValueError):
    pass


class NoLabels(LeastCoreError, ValueError):
    pass


class DegenerateLabels(LeastCoreError, ValueError):
    pass


class MissingHoldoutColumn(LeastCoreError, ValueError):
    pass


class DegenerateProposal(LeastCoreError, ValueError):
    pass


class DimensionMismatch(LeastCoreError, ValueError):
    pass


class MismatchedN(LeastCoreError, ValueError):
    pass


class InvalidParams(LeastCoreError, ValueError):
    pass


class SpawnError(LeastCoreError, OSError):
    pass


class PluginTimeout(LeastCoreError, TimeoutError):
    pass


class PluginProtocolError(LeastCoreError, RuntimeError):
    pass
