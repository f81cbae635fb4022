"""Exception hierarchy shared by every solver in the package."""


class PABError(Exception):
    """Base class for all errors raised by :mod:`pabgame`."""


class InvalidProfile(PABError, ValueError):
    """An activation price lies outside ``[0, p_hat]``."""


class NoRoot(PABError, RuntimeError):
    """A monotone root search failed; signals a broken demand model."""


class LipschitzViolation(PABError, ValueError):
    """A sampled supply function has a segment steeper than ``K``."""


class InconsistentDomain(PABError, ValueError):
    """Sampled supplies do not share the scenario's price domain."""


class OutOfRange(PABError, ValueError):
    """Argument outside the domain of the inverse map."""


class NotAffine(PABError, ValueError):
    """Operation requires an affine demand model."""


class NotQuadratic(PABError, ValueError):
    """Operation requires quadratic production costs."""


class HeterogeneousB(PABError, ValueError):
    """Quadratic costs do not share a common marginal cost at zero."""


class NonPositiveParams(PABError, ValueError):
    """A model parameter that must be positive is not."""


class AlphaOutOfRange(PABError, ValueError):
    """Bertrand selection parameter outside ``[0, n^2/(n+1)]``."""


class NoConvergence(PABError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate is attached as ``last_iterate`` so callers can retry,
    e.g. with a smaller damping factor.
    """

    def __init__(self, message, last_iterate=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class NewtonDivergence(PABError, RuntimeError):
    """Newton's method stopped reducing the residual."""
