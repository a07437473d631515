"""Exception hierarchy shared by all modules."""


class BSClusterError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(BSClusterError, ValueError):
    """Invalid scenario or experiment configuration.

    ``key`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class BudgetError(BSClusterError, ValueError):
    """Exhaustive enumeration requested beyond its size budget."""


class InvalidDeviationError(BSClusterError, ValueError):
    """A deviation that does not satisfy its structural preconditions."""


class NumericError(BSClusterError, ArithmeticError):
    """A numerical routine failed (bracketing, non-finite values, ...)."""


class ConvergenceError(NumericError):
    """An iterative solver stopped above its tolerance.

    Attributes
    ----------
    leakage : float
        Residual interference leakage at the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, leakage, iterations):
        self.leakage = leakage
        self.iterations = iterations
        super().__init__(f"{message} (leakage={leakage:.3e} after {iterations} iterations)")


class DegenerateChannelError(NumericError):
    """A null space needed by the IIA construction is narrower than required."""


class MalformedResultsError(BSClusterError, ValueError):
    """A result CSV that cannot be parsed."""
