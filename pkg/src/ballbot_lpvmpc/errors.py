"""Exception types raised across the package."""


class BallbotError(Exception):
    """Base class for all package errors."""


class SingularMass(BallbotError):
    """The mass matrix determinant is too close to zero to invert."""


class DegenerateAngle(BallbotError):
    """Zenith angle at which the torque conversion matrix is undefined."""


class StepFailure(BallbotError):
    """Adaptive integration could not complete the requested interval."""


class Diverged(BallbotError):
    """Damped Newton iteration failed to reduce the residual."""


class SingularJacobian(BallbotError):
    """Least-squares Newton step is rank deficient."""


class NoConvergence(BallbotError):
    """Fixed-point / doubling iteration exhausted its budget."""


class SchedulingOutOfRange(BallbotError):
    """A scheduling node left the (inflated) admissible box."""


class Infeasible(BallbotError):
    """The QP has no point satisfying its constraints."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(BallbotError):
    """Malformed or inconsistent configuration."""
