from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .moment import MomentSequence

# Upper limit for the multiplier steplength of the ADMM family used here.
GOLDEN_STEP = (1 + 5 ** 0.5) / 2


class SolverOptions(BaseModel):
    """Parameters of the penalized DCA / sGS-ADMM solver."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma: float = Field(1e-5, ge=0.0)
    rho_pen: float = Field(1.0, gt=0.0)
    steplength: float = Field(1.5, gt=0.0, lt=GOLDEN_STEP)
    admm_penalty: float = Field(1.0, gt=0.0)
    proximal: float = Field(1e-3, gt=0.0)
    tol_kkt: float = Field(1e-7, gt=0.0)
    tol_dca: float = Field(1e-8, gt=0.0)
    max_admm_iters: int = Field(20_000, ge=1)
    max_dca_iters: int = Field(50, ge=1)
    check_every: int = Field(10, ge=1)
    seed: int = 0
    init: Literal["zero", "random_atoms", "warm_start"] = "random_atoms"
    warm_start: Optional[List[float]] = None
    rho_escalation: bool = False
    rho_max: float = Field(1e3, gt=0.0)

    @model_validator(mode="after")
    def _warm_start_present(self):
        if self.init == "warm_start" and not self.warm_start:
            raise ValueError("init='warm_start' needs a warm_start moment vector")
        return self


class MultistartConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    starts: int = Field(1, ge=1)
    seed: int = 0

    @field_validator("seed")
    @classmethod
    def _non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("seed must be non-negative")
        return v


@dataclass(frozen=True)
class SolverResiduals:
    primal_feas: float
    dual_feas: float
    psd_residual: float
    rank_residual: float
    dca_gap: float

    def max(self) -> float:
        return max(self.primal_feas, self.dual_feas, self.psd_residual, self.rank_residual)


@dataclass(frozen=True)
class PrimalSolution:
    """Solver iterate (B, X, y) with multipliers (U, V, W) and its residuals."""

    B: np.ndarray
    X: np.ndarray
    y: MomentSequence
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    sigma: float
    rho: float
    psi: float
    residuals: SolverResiduals
    converged: bool = True
    dca_iterations: int = 0
    admm_iterations: int = 0
    seed: Optional[int] = None
    history: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def Z(self) -> np.ndarray:
        """Dual slack σE₀ - V."""
        Z = -np.array(self.V, dtype=float)
        Z[0, 0] += self.sigma
        return Z

    def with_updates(self, **changes) -> "PrimalSolution":
        return replace(self, **changes)
