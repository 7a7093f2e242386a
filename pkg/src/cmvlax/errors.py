"""Exception types raised across the package."""


class CMVLaxError(Exception):
    """Base class for all package errors."""


class SingularInput(CMVLaxError, ValueError):
    """A matrix that must be invertible is numerically singular."""


class NoConvergence(CMVLaxError, RuntimeError):
    """An iterative eigensolver did not converge."""


class OutOfDisk(CMVLaxError, ValueError):
    """A Verblunsky coefficient lies on or outside the unit circle."""


class NotCMV(CMVLaxError, ValueError):
    """A matrix fails the structural checks of a finite CMV matrix."""


class NotInOrbit(CMVLaxError, ValueError):
    """A matrix is not in the expected block-diagonal orbit set."""


class IllConditioned(CMVLaxError, ArithmeticError):
    """A linear solve is too badly conditioned to be trusted."""


class StepRejected(CMVLaxError, ArithmeticError):
    """An integrator step blew up the structure residual."""


class DiskExit(CMVLaxError, ArithmeticError):
    """A coefficient left the open unit disk during a flow.

    Attributes:
        time: flow time at which the exit was detected.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class InvalidParams(CMVLaxError, ValueError):
    """Bad numerical parameters (step size, power, end time)."""
