"""Exception hierarchy shared by all modules."""


class WaveGecError(Exception):
    """Base class for every error raised by the package."""


class DomainError(WaveGecError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericError(WaveGecError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class OutOfScopeError(WaveGecError, ValueError):
    """The request falls outside the supported class of problems."""


class PreconditionError(WaveGecError, ValueError):
    """A documented precondition was violated by the inputs."""


class ResourceError(WaveGecError, RuntimeError):
    """A hard computational cap (steps, horizon, frequency) would be exceeded."""


class VerificationImpossibleError(WaveGecError, ValueError):
    """Not enough information is available to decide a membership check."""


class InternalError(WaveGecError, RuntimeError):
    """An invariant that the construction guarantees was found broken."""


class GECClassError(WaveGecError, ValueError):
    """The class has a bounded growth envelope, so no growing example exists."""


class CounterexampleImpossibleError(WaveGecError, ValueError):
    """The class parameters leave no room for a growing coefficient."""
