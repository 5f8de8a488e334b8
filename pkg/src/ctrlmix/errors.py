"""Exception hierarchy shared by all subpackages."""


class CtrlmixError(Exception):
    """Base class for library errors."""


class ConfigurationError(CtrlmixError, ValueError):
    """Invalid model or experiment configuration."""


class NumericalBlowupError(CtrlmixError, FloatingPointError):
    """A map produced non-finite output."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class InstabilityError(NumericalBlowupError):
    """Time stepping became unstable; a smaller step is suggested."""


class SizeError(CtrlmixError, ValueError):
    """Problem too large for an exact solver."""


class GridMismatchError(CtrlmixError, ValueError):
    """Two density grids do not share the same layout."""


class SingularMapError(CtrlmixError, ArithmeticError):
    """Newton inversion of a near-identity map failed."""


class PathologicalDensityError(CtrlmixError, RuntimeError):
    """Rejection sampling exceeded its attempt cap."""


class FluxViolationError(CtrlmixError, ValueError):
    """Boundary data carries nonzero net flux."""


class ResolutionError(CtrlmixError, ValueError):
    """Grid too coarse for the requested construction."""

    def __init__(self, message, suggested_n=None):
        super().__init__(message)
        self.suggested_n = suggested_n


class ConvergenceError(CtrlmixError, RuntimeError):
    """An iterative solver did not reach its tolerance."""


class InfeasibleError(CtrlmixError, ValueError):
    """No admissible solution exists for the requested target."""


class StabiliserDomainError(CtrlmixError, ValueError):
    """Cost coupling requested for a pair outside the diagonal set."""


class InsufficientDataError(CtrlmixError, ValueError):
    """Not enough samples for a statistical test."""
