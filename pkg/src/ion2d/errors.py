"""Exception types shared across the package."""


class Ion2dError(Exception):
    """Base class for all package-specific errors."""


class ConvergenceError(Ion2dError):
    """An iterative solver stopped without reaching its tolerance.

    Carries the best residual seen so the caller can decide whether the
    result is still usable.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapacityError(Ion2dError):
    """Requested problem size exceeds what the implementation supports."""


class UnstableCrystalError(Ion2dError):
    """A mode matrix has a non-positive eigenvalue (crystal not a minimum)."""


class ResonanceError(Ion2dError):
    """A drive tone sits inside the guard band around a mode frequency."""


class EstimationError(Ion2dError):
    """An estimator received data outside its domain of validity."""


class NearCollisionError(Ion2dError):
    """Two ions approached closer than the integrator can resolve."""
