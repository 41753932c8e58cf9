"""Exception types shared across the package."""


class RieGamesError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RieGamesError):
    """Operands have incompatible shapes or live on incompatible spaces."""


class NonSymmetric(RieGamesError):
    """A matrix violated the symmetry tolerance."""


class NoConvergence(RieGamesError):
    """An iterative kernel exhausted its sweep budget."""


class NotPositiveDefinite(RieGamesError):
    """An eigenvalue fell at or below the positive-definiteness floor."""


class BasePointMismatch(RieGamesError):
    """Tangent vectors are anchored at different base points."""


class InvalidTangent(RieGamesError):
    """A tangent vector violates the manifold's tangency invariant."""


class NegativeDistance(RieGamesError):
    """A distance argument was negative."""


class EvaluationFailure(RieGamesError):
    """A loss or gradient evaluator raised while being queried."""


class NonPositiveRadius(RieGamesError):
    """A ball radius must be strictly positive."""


class DegenerateSample(RieGamesError):
    """Sampled pair was too close to evaluate a finite quotient."""


class InvalidAnchor(RieGamesError):
    """An anchor point is not a valid point of its manifold."""


class InvalidGamma(RieGamesError):
    """Robustness tradeoff parameter outside the admissible range."""


class CouplingTooLarge(RieGamesError):
    """Coupling strength breaks strong monotonicity."""


class InvalidConstants(RieGamesError):
    """Schedule constants are inconsistent (need 0 < mu <= L, eps > 0, ...)."""


class StepSizeTooLarge(RieGamesError):
    """A step size violates the descent precondition eta <= 2*mu/L**2."""


class NumericalFailure(RieGamesError):
    """Non-finite values appeared during a run.

    Carries the partial trace recorded up to the failure in ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class PointOutsideSet(RieGamesError):
    """A point is not inside the constraint set (beyond tolerance)."""


class StrideTooCoarse(RieGamesError):
    """Auditing needs a trace recorded at every iteration."""


class InsufficientData(RieGamesError):
    """Not enough usable trace records to fit a rate."""


class GradientUnavailable(RieGamesError):
    """A constraint function was supplied without a gradient evaluator."""


class ConfigError(RieGamesError):
    """A scenario configuration file is malformed."""
