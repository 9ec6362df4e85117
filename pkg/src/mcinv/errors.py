"""Exception types shared across the package."""


class McInvError(Exception):
    """Base class for library-specific failures."""


class ConstructionError(McInvError):
    """A derived object (prior, factorization, operator) could not be built."""


class RankDeficiencyError(McInvError):
    """A required one-sided inverse does not exist for the given operator."""


class InsufficientDataError(McInvError):
    """The training set is too small or degenerate for the requested construction."""


class NumericError(McInvError):
    """A non-finite value appeared during evaluation."""


class DivergenceError(McInvError):
    """Iterative optimization diverged.

    Carries the iteration trace accumulated up to the failure so callers can
    inspect where the run went bad.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(McInvError):
    """A config file or manifest could not be parsed or validated."""
