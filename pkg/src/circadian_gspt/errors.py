"""Exception hierarchy shared by all modules."""


class CircadianError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(CircadianError, ValueError):
    """Raised for nonpositive, non-finite or inconsistent parameter values."""


class DomainError(CircadianError, ValueError):
    """A state lies outside the domain where a formula is defined."""


class SingularStateError(CircadianError, ArithmeticError):
    """A denominator of a vector field vanishes at the requested state."""


class IntegrationError(CircadianError, RuntimeError):
    """Base class for integrator failures.

    ``trajectory`` holds whatever was computed before the failure.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepFloorError(IntegrationError):
    """Error control asked for a step below ``h_min``."""


class MaxStepsError(IntegrationError):
    """The step budget ran out before ``t_end``."""


class NonFiniteStateError(IntegrationError):
    """The solution or its derivative became NaN or infinite."""


class EventRefinementError(IntegrationError):
    """Bisection on an event surface did not converge."""


class ConvergenceError(CircadianError, RuntimeError):
    """An iterative analysis procedure failed to converge."""


class FitWindowError(CircadianError, ValueError):
    """Too few usable samples to fit a rate."""
