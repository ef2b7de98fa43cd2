"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run/sweep configuration."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge; carries the worst-panel estimate."""

    def __init__(self, message: str, worst_estimate: float = float("nan")):
        super().__init__(message)
        self.worst_estimate = worst_estimate


class StabilityError(NumericalError):
    """Solver state left the physical region; a smaller step is needed."""


class InsufficientDataError(ValueError):
    """Not enough points to perform a fit."""


class RegimeError(ValueError):
    """Requested quantity is undefined in this parameter regime."""
