"""Exception and warning types shared across the package."""


class StrichartzLabError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(StrichartzLabError, ValueError):
    """A field has the wrong shape or contains non-finite samples."""


class GridMismatchError(StrichartzLabError, ValueError):
    """Two objects that must share a grid do not."""


class SingularZeroModeError(StrichartzLabError, ValueError):
    """A negative-order derivative was requested on a field with nonzero mean."""


class InvalidExponentError(StrichartzLabError, ValueError):
    """A Lebesgue or mixed-norm exponent is out of range."""


class UnsupportedExponentError(StrichartzLabError, ValueError):
    """The operation is undefined for the given exponents."""


class ConfigurationError(StrichartzLabError, ValueError):
    """Inconsistent parameters, such as an even sample count for Simpson."""


class EndpointRefusedError(ConfigurationError):
    """Quotient experiments on endpoint or inadmissible pairs are refused."""


class AliasingError(StrichartzLabError, ValueError):
    """A dilation would push spectral energy beyond the grid's Nyquist band."""


class DivergentIntegralError(StrichartzLabError, ValueError):
    """A time integral does not converge for the requested exponents."""


class WrongCaseError(StrichartzLabError, ValueError):
    """A parameter sequence was routed to the wrong branch of the frequency dichotomy."""


class UndeterminedCaseError(StrichartzLabError, ValueError):
    """A parameter sequence is neither convergent nor escaping at this depth."""


class SearchAbortedError(StrichartzLabError, RuntimeError):
    """The maximizer hit a non-finite objective.

    Attributes
    ----------
    trace : list of float
        Objective values recorded before the failure.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class SupportWarning(UserWarning):
    """A transformed field leaves the essential support of the box."""


class ResolutionWarning(UserWarning):
    """A dyadic index lies outside the grid's resolvable range."""


class RegimeWarning(UserWarning):
    """A Sobolev exponent is outside the Sobolev-Strichartz regime."""


class DegenerateInputError(StrichartzLabError, ZeroDivisionError):
    """A quotient or gradient was requested for a zero field."""
