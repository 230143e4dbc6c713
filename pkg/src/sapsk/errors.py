"""Exception types raised by the sapsk package.

Domain errors derive from :class:`SapskError` so the CLI can map them to a
single exit status, distinct from argument/usage errors.
"""


class SapskError(ValueError):
    """Base class for domain errors."""


class InvalidOrder(SapskError):
    pass


class NonDividingGamma(SapskError):
    pass


class NotPerfectSquare(SapskError):
    pass


class WrongFamily(SapskError):
    pass


class DegenerateNoise(SapskError):
    """Raised when a detector metric needs a nonzero AWGN variance."""


class ZeroPhaseNoise(SapskError):
    """The orientation threshold diverges when the phase-noise variance is zero."""
