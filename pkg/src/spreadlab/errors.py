"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit 2,
:class:`BudgetExceeded` exits 3 and :class:`NumericalFailure` subclasses exit 4.
"""


class SpreadlabError(Exception):
    """Base class for all library errors."""


class ConfigError(SpreadlabError, ValueError):
    pass


class InvalidParams(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class ZeroVector(ConfigError):
    pass


class InvalidDelta(ConfigError):
    pass


class FileFormatError(ConfigError):
    pass


class PreconditionFailed(ConfigError):
    pass


class HypothesisViolated(ConfigError):
    pass


class BudgetExceeded(SpreadlabError):
    pass


class NumericalFailure(SpreadlabError):
    pass


class SamplingFailure(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class RankDeficient(NumericalFailure):
    pass


class AttackFailed(NumericalFailure):
    pass


class NotFound(SpreadlabError):
    pass


class InvalidBall(SpreadlabError, ValueError):
    pass


class PeelStuck(SpreadlabError):
    """No vertex is eligible for peeling; ``subset`` is a set violating unique expansion."""

    def __init__(self, message, subset=None):
        super().__init__(message)
        self.subset = subset
