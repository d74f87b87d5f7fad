"""Exception hierarchy shared across the package."""


class BandCtrlError(Exception):
    """Base class for all package errors."""


class ConfigError(BandCtrlError):
    """Invalid or incomplete run configuration (schema violations included)."""


class DegenerateDiffusionError(BandCtrlError):
    """Volatility collapsed to zero where a nondegenerate diffusion is required."""


class DegenerateCurvatureError(BandCtrlError):
    """Running-cost curvature fell below the admissible floor."""


class AccuracyError(BandCtrlError):
    """A numerical routine could not reach the requested tolerance."""

    def __init__(self, message, achieved=None, target=None):
        super().__init__(message)
        self.achieved = achieved
        self.target = target


class NoRootError(BandCtrlError):
    """Root bracketing failed within the expansion budget."""


class ConvergenceError(BandCtrlError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history or []


class BoundaryNotFoundError(BandCtrlError):
    """No active gradient nodes: free boundary outside the grid or control never optimal."""
