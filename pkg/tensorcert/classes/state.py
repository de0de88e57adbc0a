from typing import Dict, List, Any, Optional
from typing_extensions import TypedDict, NotRequired, Required

from .certificate import Certificate, CertifyTolerances
from .solution import MultistartConfig, PrimalSolution, SolverOptions
from .tensor import AtomicMeasure, SymTensor3


# Define the input state
class InputState(TypedDict, total=False):
    tensor: Required[SymTensor3]
    rank: Required[int]
    options: NotRequired[SolverOptions]
    multistart: NotRequired[MultistartConfig]
    tolerances: NotRequired[CertifyTolerances]


class CertificationState(InputState):
    messages: List[Any]
    solution: PrimalSolution
    candidates: List[PrimalSolution]
    flatness: Any
    atoms: Optional[AtomicMeasure]
    extraction_error: Optional[str]
    certificate: Certificate
    refinement: Dict[str, Any]
    timings: Dict[str, float]
