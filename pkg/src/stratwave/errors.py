"""Exception hierarchy shared by all solver modules."""


class StratWaveError(Exception):
    """Base class for every error raised by this package."""


class ProfileError(StratWaveError):
    """Invalid stratification data (nonpositive g, empty window, negative density)."""


class AssumptionError(StratWaveError):
    """A prerequisite assumption audit failed for the requested operation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(StratWaveError):
    """An iterative solver did not reach the requested residual tolerance."""


class WindowEscapeError(StratWaveError):
    """A computed field left the profile's audit window."""


class BracketError(StratWaveError):
    """Root bracketing failed (no sign change in the searched range)."""


class BifurcationError(StratWaveError):
    """A bifurcation-point prerequisite failed (sign, slope, or kernel simplicity)."""
