"""Exception and warning types shared across the package."""


class VortexError(Exception):
    """Base class for errors raised by vortexre."""


class CollisionError(VortexError, ValueError):
    """Two vortices coincide (or nearly so); H and its derivatives blow up."""


class InvalidCirculationError(VortexError, ValueError):
    """A circulation, or the total circulation, vanishes."""


class ConvergenceError(VortexError, RuntimeError):
    """An iterative solve did not reach its tolerance.

    Attributes
    ----------
    residual : float
        Max-norm of the last residual.
    iterations : int
        Iterations performed before giving up.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InconsistencyError(VortexError, RuntimeError):
    """The trivial eigenvalues could not be matched; the input is not an equilibrium."""


class IntegrationError(VortexError, RuntimeError):
    """The ODE integrator failed (step-size underflow or similar)."""


class DegenerateEquilibriumWarning(UserWarning):
    """The Newton Jacobian lost rank beyond the rotation and scaling symmetries."""
