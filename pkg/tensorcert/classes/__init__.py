from .certificate import Certificate, CertificateStatus, CertifyTolerances
from .errors import (
    ExtractionError,
    IllConditionedError,
    InputError,
    NotFlatError,
    RefinementUnavailable,
    TensorCertError,
)
from .moment import MomentSequence
from .solution import MultistartConfig, PrimalSolution, SolverOptions
from .state import CertificationState, InputState
from .tensor import Atom, AtomicMeasure, SymTensor3

__all__ = [
    "Atom", "AtomicMeasure", "Certificate", "CertificateStatus", "CertificationState",
    "CertifyTolerances", "ExtractionError", "IllConditionedError", "InputError", "InputState",
    "MomentSequence", "MultistartConfig", "NotFlatError", "PrimalSolution",
    "RefinementUnavailable", "SolverOptions", "SymTensor3", "TensorCertError",
]
