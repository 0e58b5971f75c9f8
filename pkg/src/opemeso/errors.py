"""Exception types shared across the package."""


class OpemesoError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(OpemesoError):
    """Ensemble parameters violate the family's admissible range."""


class OutOfDomain(OpemesoError):
    """An index (or index window) leaves the support of a discrete family."""


class Singular(OpemesoError):
    """A matrix is numerically singular (recursion denominator or LU failure)."""


class WindowTooSmall(OpemesoError):
    """Truncation window margin is below the minimal safe size."""


class NoConvergence(OpemesoError):
    """Adaptive refinement stalled above the requested tolerance."""


class IllConditioned(OpemesoError):
    """A least-squares design matrix is too ill-conditioned to trust."""


class Unsupported(OpemesoError):
    """Operation is not available for the given ensemble family."""
