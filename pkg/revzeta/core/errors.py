from typing import Any, Dict, Optional


class RevzetaError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(RevzetaError):
    """Run configuration could not be parsed or validated."""

    exit_code = 2


class OutputError(RevzetaError):
    """Writing an artifact to disk failed."""

    exit_code = 4


class NumericalError(RevzetaError):
    """A numerical step failed to reach its tolerance."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        diagnostics: Optional[Dict[str, Any]] = None,
        partial: Optional[float] = None,
    ):
        super().__init__(message, diagnostics)
        self.partial = partial


class PositivityViolation(NumericalError):
    """Profile is not strictly positive on the validation grid."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature exhausted its subdivisions before meeting tolerance."""


# Name used by the quadrature routines themselves
SubdivisionLimit = QuadratureFailure


class NonDecayDetected(QuadratureFailure):
    """Integrand of an improper integral does not decay at large argument."""


class TailBoundUnmet(NumericalError):
    """Mode series tail estimate stayed above target at the truncation cap."""


class StiffnessFailure(NumericalError):
    """Radial integrator step size underflowed."""


class ToleranceUnmet(NumericalError):
    """Radial integrator ran out of steps before reaching the end point."""


class DifferentiationFailure(NumericalError):
    """Richardson extrapolation of finite differences did not settle."""
