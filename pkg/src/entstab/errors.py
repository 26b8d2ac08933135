"""Exception types shared across the package."""


class EntstabError(Exception):
    """Base class for all package errors."""


class LayoutError(EntstabError, ValueError):
    """Malformed Hilbert-space layout."""


class LayoutMismatchError(EntstabError, ValueError):
    """Operands live on different Hilbert-space layouts."""


class AboveThresholdError(EntstabError, ValueError):
    """Parametric pump at or above the oscillation threshold (|2*Omega_p/Delta_c| >= 1)."""


class TruncationError(EntstabError, ValueError):
    """Fock cutoff too small for the requested state."""


class ControlEvaluationError(EntstabError, RuntimeError):
    """Control signal came out non-finite; integrator state is corrupt."""


class IntegratorAbortError(EntstabError, RuntimeError):
    """State audit failed (trace drift or negativity beyond abort limits)."""


class ConfigError(EntstabError, ValueError):
    """Invalid experiment configuration."""
