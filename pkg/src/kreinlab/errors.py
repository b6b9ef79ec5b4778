"""Exception hierarchy shared by all kreinlab modules."""


class KreinLabError(Exception):
    """Base class for every error raised by kreinlab."""


class InvalidInputError(KreinLabError, ValueError):
    """Malformed arguments: bad grids, non-positive radii, mismatched trajectories."""


class DomainError(KreinLabError, ValueError):
    """A spectral parameter lies outside the half-plane an operation is defined on."""


class SzegoViolationError(KreinLabError, ValueError):
    """log of the density is not integrable (the density vanishes somewhere)."""


class IntegrityError(KreinLabError, ArithmeticError):
    """A quantity that is provably nonzero came out numerically zero."""


class DegeneratePairError(KreinLabError, ValueError):
    """The Christoffel-Darboux quotient has a vanishing denominator."""


class DegenerateMeasureError(KreinLabError, ValueError):
    """Moment data do not come from a nontrivial probability measure."""


class IllConditionedError(KreinLabError, ArithmeticError):
    """Normal equations could not be solved even after ridge regularization."""

    def __init__(self, message, condition_estimate=float("nan")):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class ConfigError(KreinLabError, ValueError):
    """An experiment configuration failed validation."""
