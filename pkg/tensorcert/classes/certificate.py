from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class CertificateStatus(str, Enum):
    BEST_RANK_R = "BestRankR"
    QUASI_OPTIMAL = "QuasiOptimalAlpha"
    UNCERTIFIED = "Uncertified"


class CertifyTolerances(BaseModel):
    """Gate tolerances; each is relative to max(1, ‖M(A)‖) unless noted."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dual_feas: float = Field(1e-6, gt=0)
    psd: float = Field(1e-8, gt=0)
    complementarity: float = Field(1e-6, gt=0)
    projection: float = Field(1e-6, gt=0)
    gap: float = Field(1e-6, gt=0)
    primal_feas: float = Field(1e-6, gt=0)
    rank: float = Field(1e-6, gt=0)
    spectral_starts: int = Field(50, ge=1)
    seed: int = 0


class GateResult(BaseModel):
    passed: bool
    value: float
    threshold: float
    margin: float


class CertificateDiagnostics(BaseModel):
    duality_gap: float
    psi: float
    phi: float
    dual_feas_residual: float
    psd_min_eig: float
    complementarity: float
    projection_gap: float
    projection_tie: bool
    rank_B: int
    ranks: Tuple[int, int]
    flat: bool
    rho_hat: float
    rho_hat_provenance: str
    sigma: float
    tau: Optional[float] = None
    tau_provenance: Optional[str] = None
    alpha: Optional[float] = None
    refined_residual: Optional[float] = None
    residual: float
    entry_residual: float
    rank_r_plus_one_bound: Optional[float] = None
    cancelling_pairs: List[Tuple[int, int]] = Field(default_factory=list)


class Certificate(BaseModel):
    status: CertificateStatus
    alpha: Optional[float] = None
    reason: str
    gates: Dict[str, GateResult]
    diagnostics: CertificateDiagnostics
    caveats: List[str] = Field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status != CertificateStatus.UNCERTIFIED
