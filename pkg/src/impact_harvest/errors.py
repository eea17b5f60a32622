"""Exception types raised across the package."""


class HarvestError(Exception):
    """Base class for package errors."""


class DomainError(HarvestError, ValueError):
    """Input outside the admissible domain of an operation."""


class NoImpact(HarvestError):
    """No barrier contact before the search horizon."""


class Chatter(HarvestError):
    """Accumulating impacts (sticking); the flight model no longer applies."""


class GrazingSingularity(HarvestError):
    """A leg Jacobian denominator vanished: the next impact has zero velocity."""


class NoConvergence(HarvestError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


class SpuriousRoot(HarvestError):
    """Residuals vanish but the orbit is not physically admissible."""

    def __init__(self, message, orbit=None):
        super().__init__(message)
        self.orbit = orbit


class InsufficientWindow(HarvestError):
    """Observation window too short to test the requested period multiples."""


class NotFound(HarvestError):
    """A scan found no pattern change inside its range."""
