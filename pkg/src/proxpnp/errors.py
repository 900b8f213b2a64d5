"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An inner iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        Residual norm at the last iterate.
    estimate : object
        Last iterate or last estimate produced by the solver.
    """

    def __init__(self, message, residual=float("nan"), estimate=None):
        super().__init__(message)
        self.residual = residual
        self.estimate = estimate


class InversionError(ConvergenceError):
    """Inversion of a denoiser failed; the input is likely outside its image."""


class ValidationError(ValueError):
    """A configuration violates the convergence condition of its scheme."""

    def __init__(self, report):
        super().__init__(report.message)
        self.report = report
