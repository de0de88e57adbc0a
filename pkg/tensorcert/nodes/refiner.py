import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from langchain_core.messages import AIMessage

from ..classes.errors import InputError, RefinementUnavailable
from ..classes.solution import PrimalSolution
from ..classes.state import CertificationState
from ..classes.tensor import AtomicMeasure, SymTensor3
from ..utils.lowrank import svd
from ..utils.tensor_core import contract, rank_one_full, spectral_radius

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class RankOneRefinement:
    weight: float
    vector: np.ndarray
    residual: float
    refined: bool
    note: str = ""


@dataclass(frozen=True)
class CoefficientRefinement:
    weights: np.ndarray
    vectors: np.ndarray
    residual: float
    nonpositive: bool
    condition: float = field(default=1.0)

    def measure(self) -> AtomicMeasure:
        """Atoms of the refined approximant (sign absorbed into the vector)."""
        return AtomicMeasure.from_pairs(
            (w, v) for w, v in zip(self.weights, self.vectors.T) if w != 0
        )


def rank_one_vector(B: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Left singular vector of a rank-one B, signed so that <A, x^{⊗3}> > 0."""
    U, _, _ = svd(B)
    x = U[:, 0]
    if float(x @ contract(T, x)) < 0:
        x = -x
    return x


def rank_one_refine(A: SymTensor3, sol: PrimalSolution, sigma: Optional[float] = None,
                    rho_hat: Optional[float] = None) -> RankOneRefinement:
    """Best rank-one approximant (X₀₀ + σ) x^{⊗3} read off a rank-one solution."""
    sigma = sol.sigma if sigma is None else sigma
    T = A.to_full()
    x = rank_one_vector(sol.B, T)
    weight = float(sol.X[0, 0])
    if rho_hat is None:
        rho_hat = spectral_radius(A).value
    refined = sigma < rho_hat
    note = ""
    if refined:
        weight += sigma
    else:
        note = f"sigma={sigma:g} is not below the spectral radius estimate {rho_hat:.6g}; weight left unrefined"
        logger.warning(note)
    residual = float(np.linalg.norm(T - weight * rank_one_full(x)))
    return RankOneRefinement(weight=weight, vector=x, residual=residual, refined=refined, note=note)


def refine_coefficients(A: SymTensor3, vectors: Sequence[np.ndarray], sigma: float = 0.0) -> CoefficientRefinement:
    """Least-squares weights for fixed unit vectors.

    Solves C μ = u - σ·1 with C the entrywise cube of the Gram matrix and
    uᵢ = <A, xᵢ^{⊗3}>; for σ = 0 the residual is ‖A‖² - uᵀC⁻¹u.
    """
    F = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    if F.shape[0] != A.n:
        raise InputError(f"vectors of dimension {F.shape[0]} do not match n={A.n}")
    if np.max(np.abs(np.linalg.norm(F, axis=0) - 1.0)) > 1e-8:
        raise InputError("refinement vectors must have unit norm")
    C = (F.T @ F) ** 3
    cond = float(np.linalg.cond(C))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RefinementUnavailable(f"coefficient system is singular (condition {cond:.3e})")
    T = A.to_full()
    u = np.array([float(x @ contract(T, x)) for x in F.T])
    mu = np.linalg.solve(C, u - sigma)
    approx = np.einsum("r,ir,jr,kr->ijk", mu, F, F, F)
    residual = float(np.linalg.norm(T - approx))
    nonpositive = bool(np.any(mu <= 0))
    if nonpositive:
        logger.warning(f"Refined coefficients contain nonpositive entries: {mu}")
    return CoefficientRefinement(weights=mu, vectors=F, residual=residual,
                                 nonpositive=nonpositive, condition=cond)


class Refiner:
    """Refines the certified approximant: rank-one weight shift or coefficient least squares."""

    async def refine(self, state: CertificationState) -> CertificationState:
        tensor, rank = state["tensor"], state["rank"]
        sol = state["solution"]
        certificate = state.get("certificate")
        result = {}
        try:
            if rank == 1:
                refinement = rank_one_refine(tensor, sol, rho_hat=certificate.diagnostics.rho_hat if certificate else None)
                result = {"kind": "rank_one", "weight": refinement.weight,
                          "vector": refinement.vector.tolist(), "residual": refinement.residual,
                          "refined": refinement.refined}
            elif atoms := state.get("atoms"):
                refinement = refine_coefficients(tensor, list(atoms.vectors().T))
                result = {"kind": "coefficients", "weights": refinement.weights.tolist(),
                          "vectors": refinement.vectors.T.tolist(), "residual": refinement.residual,
                          "nonpositive": refinement.nonpositive}
        except RefinementUnavailable as e:
            logger.warning(f"Refinement skipped: {e}")
            result = {"kind": "unavailable", "reason": str(e)}

        msg = f"🔧 Refiner: {result.get('kind', 'nothing to refine')}"
        if "residual" in result:
            msg += f", residual {result['residual']:.6f}"
        logger.info(msg)
        messages = state.get("messages", [])
        messages.append(AIMessage(content=msg))
        state["messages"] = messages
        state["refinement"] = result
        return state

    async def run(self, state: CertificationState) -> CertificationState:
        return await self.refine(state)
