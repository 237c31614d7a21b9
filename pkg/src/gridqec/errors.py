"""Exception and warning types shared across the package."""


class GridQecError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpaceError(GridQecError):
    """Operator or state requested on an unusable Hilbert space."""


class SpaceTagError(GridQecError):
    """Operation applied to a state with the wrong space tag."""


class TruncationTailError(GridQecError):
    """State support extends past the Fock truncation beyond tolerance."""


class ScheduleError(GridQecError):
    """Pulse schedule violates ordering or content constraints."""


class StepSizeError(GridQecError):
    """Integrator step exceeds the stability bound."""


class InfeasiblePulseError(GridQecError):
    """Requested gate cannot be realised within the pulse constraints."""


class FitError(GridQecError):
    """Curve fit failed to converge or produced unusable parameters."""


class UnresolvedPeaksError(GridQecError):
    """Marginal has no resolvable comb peaks to fit."""


class NoInformationError(GridQecError):
    """Measurement error probability leaves no usable signal."""


class ConfigError(GridQecError):
    """Experiment configuration is malformed or out of range."""


class TruncationWarning(UserWarning):
    """Expected photon number is close to the Fock truncation."""


class CoarseGridWarning(UserWarning):
    """Phase-space grid is too coarse for a faithful representation."""


class SuspiciousConfigWarning(UserWarning):
    """Run produced results that suggest a misconfigured experiment."""
