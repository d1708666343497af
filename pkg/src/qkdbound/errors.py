"""Exception hierarchy shared by all evaluators."""


class QKDBoundError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QKDBoundError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigurationError(QKDBoundError, ValueError):
    """A parameter set is inconsistent (e.g. it implies a negative key length)."""


class GuardError(QKDBoundError, ValueError):
    """An exhaustive routine was asked to enumerate more than it is allowed to."""


class ConvergenceError(QKDBoundError, RuntimeError):
    """A numerical refinement did not reach its tolerance."""
