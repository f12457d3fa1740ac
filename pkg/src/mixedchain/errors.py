"""Exception types shared across the package."""


class MixedChainError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(MixedChainError, ValueError):
    """Invalid parameters or inconsistent inputs (CLI exit code 2)."""


class DimensionCapError(ValidationError):
    """Hilbert-space dimension exceeds the configured cap for the requested path."""


class NumericalError(MixedChainError, RuntimeError):
    """A numerical procedure failed: non-convergence, loss of positivity,
    or an internal consistency check (CLI exit code 3)."""


class SignProblemError(NumericalError):
    """A negative sampling weight was produced; indicates an implementation bug."""
