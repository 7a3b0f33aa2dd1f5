"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map them onto stable exit codes (configuration/setup problems
exit 2, check failures exit 1).
"""


class GkdvError(Exception):
    """Base class for all package-specific errors."""


class SingularSystem(GkdvError):
    """Constrained profile solve left a residual above tolerance."""


class DomainTooSmall(GkdvError):
    """Profile domain too short for the left plateau of P to form."""


class ConvergenceFailure(GkdvError):
    """Eigenvalue iteration failed to converge."""


class DegenerateLadder(GkdvError):
    """Exponent ladder cannot be placed strictly between 1/43 and its cap."""


class BubbleCollision(GkdvError):
    """Tail model invalid: a bubble center sits on top of another's tail origin."""


class GridTooNarrow(GkdvError):
    """Sampling grid does not contain all bubbles with margin."""


class ProfileDomainExceeded(GkdvError):
    """Too many profile lookups fell outside the tabulated domain."""


class InitOutOfBand(GkdvError):
    """Initial energy-correction amplitude violates its smallness bound."""


class StepFailure(GkdvError):
    """ODE integrator underflowed its minimum step."""


class NoConvergence(GkdvError):
    """Shooting iteration exhausted its budget."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BlowupDetected(GkdvError):
    """Sup-norm of the evolved field exceeded the abort threshold."""


class CFLViolation(GkdvError):
    """Requested time step exceeds the advective stability limit."""


class TrajectoryTooSparse(GkdvError):
    """s-sampling too coarse to difference the ansatz in time."""


class BubbleCountMismatch(GkdvError):
    """Fewer separated peaks found than bubbles requested."""
