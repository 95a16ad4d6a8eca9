"""Exception hierarchy shared across the package."""


class ConjDesignError(Exception):
    """Base class for all package errors."""


class DimensionError(ConjDesignError):
    """A vector or profile has the wrong shape for the game it is used with."""


class EvaluationError(ConjDesignError):
    """An objective or gradient produced a non-finite value.

    Carries the offending point in ``.point`` when available.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class PreconditionError(ConjDesignError):
    """An operation was called at a point violating its stated precondition."""


class SingularityError(ConjDesignError):
    """A matrix required to be invertible (or nonzero) is rank deficient."""


class MissingConjectureError(ConjDesignError, KeyError):
    """A conjecture for the requested ordered player pair is not registered."""


class FitDomainError(ConjDesignError):
    """Fitted conjecture parameters fall outside the declared parameter box."""


class GradientValidationError(ConjDesignError):
    """A supplied analytic gradient disagrees with finite differences."""


class DivergenceError(ConjDesignError):
    """A learning dynamic produced a non-finite iterate.

    ``.last_iterate`` holds the last finite profile, ``.step`` the step index
    at which the non-finite value appeared.
    """

    def __init__(self, message, last_iterate=None, step=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.step = step


class GameSpecError(ConjDesignError):
    """A game/conjecture/profile file failed validation.

    ``.field`` names the offending entry when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
