"""Exception hierarchy shared by all adjpair modules."""


class AdjPairError(Exception):
    """Base class for every error raised by adjpair."""


class DomainError(AdjPairError, ValueError):
    """A point lies outside the support, or an argument outside its domain."""


class ParameterError(AdjPairError, ValueError):
    """Invalid distribution parameters."""


class ConfigurationError(AdjPairError, ValueError):
    """Incompatible marginal / adjustment pairing or bad option combination."""


class InvalidModelError(AdjPairError, ValueError):
    """The dependence parameter makes the joint density improper."""


class ConvergenceError(AdjPairError, RuntimeError):
    """Optimisation failed to converge within its restart budget."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class DataError(AdjPairError, ValueError):
    """Malformed or invariant-violating input data."""
