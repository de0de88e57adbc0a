from typing import Any, Dict, Optional


class TensorCertError(ValueError):
    """Base class for every error raised by the library."""


class InputError(TensorCertError):
    """Invalid tensor, shape, rank or option."""


class NotFlatError(TensorCertError):
    """The moment sequence fails the flatness condition."""


class ExtractionError(TensorCertError):
    """Atom extraction from a flat moment sequence broke down numerically."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IllConditionedError(TensorCertError):
    """Neither conditioning requirement on a candidate decomposition holds."""


class RefinementUnavailable(TensorCertError):
    """The coefficient system of a refinement is numerically singular."""
