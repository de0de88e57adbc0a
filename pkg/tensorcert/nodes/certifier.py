import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from langchain_core.messages import AIMessage

from ..classes.certificate import (
    Certificate,
    CertificateDiagnostics,
    CertificateStatus,
    CertifyTolerances,
    GateResult,
)
from ..classes.errors import ExtractionError, IllConditionedError, InputError, NotFlatError
from ..classes.solution import PrimalSolution
from ..classes.state import CertificationState
from ..classes.tensor import AtomicMeasure, SymTensor3
from ..utils.lowrank import membership_test, min_eig, numerical_rank, project_rank, projection_gap
from ..utils.moments import (
    adjoint_L,
    adjoint_M,
    adjoint_P,
    block_P,
    extract_atoms,
    flatness,
    index_table,
    localizing_matrix,
    moment_matrix,
    moment_operators,
)
from ..utils.tensor_core import (
    SpectralEstimate,
    entry_norm,
    flatten,
    hs_norm,
    spectral_radius,
    tau,
    unflatten,
)
from .refiner import rank_one_refine

logger = logging.getLogger(__name__)

GATE_ORDER = ("rank", "dual_feasibility", "dual_psd", "complementarity", "projection",
              "duality_gap", "primal_feasibility")
RHO_CAVEAT = "rho_hat is a multistart lower bound on the spectral radius, not its exact value"
TAU_CAVEAT = "tau computed from candidate decomposition (extracted atoms), not from an unknown best approximant"


def dual_objective(U: np.ndarray, A: SymTensor3, r: int) -> float:
    """½‖M(A)‖² - Θ_r(M(A) - U)."""
    MA = flatten(A)
    U = np.asarray(U, dtype=float)
    if U.shape != MA.shape:
        raise InputError(f"U must be {MA.shape}, got {U.shape}")
    return 0.5 * float(np.sum(MA ** 2)) - project_rank(MA - U, r).theta


@dataclass(frozen=True)
class DualFeasibility:
    residual: float
    min_eig: float


def dual_feasibility(U: np.ndarray, W: np.ndarray, Z: np.ndarray, sigma: float, k: int = 2) -> DualFeasibility:
    """‖M*(Z) + P*(U) - L*(W) - σM*(E₀)‖ and the smallest eigenvalue of Z."""
    n = np.asarray(U).shape[0]
    vec = adjoint_M(Z, n, k) + adjoint_P(U, n, k) - adjoint_L(W, n, k)
    vec[0] -= sigma
    return DualFeasibility(residual=float(np.linalg.norm(vec)), min_eig=min_eig(np.asarray(Z, dtype=float)))


def quasi_alpha(norm_A: float, r: int, sigma: float, tau_value: float) -> float:
    if not tau_value > 0:
        raise InputError(f"tau must be positive, got {tau_value}")
    if r < 1 or sigma < 0:
        raise InputError(f"invalid rank {r} or sigma {sigma}")
    return 2.0 * np.sqrt(r / tau_value) * ((1.0 - np.sqrt(tau_value / r)) * norm_A + 2.0 * sigma) * sigma


def strictly_feasible_dual(n: int, sigma: float, lambdas: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(U, W, Z) with u = 0 and w(x) = λ₀ + λ₁xᵀx, -σ < λ₀ < λ₁ < 0; Z is positive definite."""
    lam0, lam1 = lambdas
    if not -sigma < lam0 < lam1 < 0:
        raise InputError("need -sigma < lambda_0 < lambda_1 < 0")
    table = index_table(n, 2)
    ops = moment_operators(n, 2)
    Z = np.zeros((ops.size_m, ops.size_m))
    for p, alpha in enumerate(table.graded_lex):
        degree = sum(alpha)
        if degree == 0:
            Z[p, p] = sigma + lam0
        elif degree == 1:
            Z[p, p] = lam1 - lam0
        else:
            Z[p, p] = -lam1 if max(alpha) == 2 else -2.0 * lam1
    W = np.diag([lam0] + [lam1] * n)
    return np.zeros((n, n * n)), W, Z


def cancelling_pairs(atoms: AtomicMeasure, tol: float = 1e-6) -> List[Tuple[int, int]]:
    """Atom pairs whose rank-one terms cancel: ∛λᵢ xᵢ ≈ -∛λⱼ xⱼ."""
    scaled = [np.cbrt(a.weight) * a.vector for a in atoms]
    pairs = []
    for i in range(len(scaled)):
        for j in range(i + 1, len(scaled)):
            if np.linalg.norm(scaled[i] + scaled[j]) <= tol * max(1.0, np.linalg.norm(scaled[i])):
                pairs.append((i, j))
    return pairs


def _gate_le(value: float, threshold: float) -> GateResult:
    return GateResult(passed=bool(value <= threshold), value=float(value),
                      threshold=float(threshold), margin=float(threshold - value))


def _gate_ge(value: float, threshold: float) -> GateResult:
    return GateResult(passed=bool(value >= threshold), value=float(value),
                      threshold=float(threshold), margin=float(value - threshold))


def _gate_lt(value: float, threshold: float) -> GateResult:
    return GateResult(passed=bool(value < threshold), value=float(value),
                      threshold=float(threshold), margin=float(threshold - value))


def certify(A: SymTensor3, r: int, sol: PrimalSolution, tols: Optional[CertifyTolerances] = None,
            atoms: Optional[AtomicMeasure] = None,
            spectral: Optional[SpectralEstimate] = None) -> Certificate:
    """Classify a primal-dual candidate as best rank-r, α-quasi-optimal, or uncertified."""
    tols = tols or CertifyTolerances()
    n = A.n
    if sol.B.shape != (n, n * n) or sol.y.n != n or sol.y.k != 2:
        raise InputError("solution shapes do not match the tensor")
    if not 1 <= r <= n:
        raise InputError(f"rank must satisfy 1 <= r <= n = {n}, got {r}")

    MA = flatten(A)
    scale = max(1.0, float(np.linalg.norm(MA)))
    sigma = sol.sigma
    y = sol.y
    B_bar = block_P(y)
    X_bar = moment_matrix(y)
    Z = sol.Z

    psi = 0.5 * float(np.sum((MA - B_bar) ** 2)) + sigma * float(X_bar[0, 0])
    phi = dual_objective(sol.U, A, r)
    gap = psi - phi
    feas = dual_feasibility(sol.U, sol.W, Z, sigma)
    complementarity = abs(float(np.sum(Z * X_bar)))
    projection = project_rank(MA - sol.U, r)
    proj_gap = projection_gap(B_bar, MA - sol.U, r)
    rank_B = max(numerical_rank(B_bar, tols.rank), numerical_rank(sol.B, tols.rank))
    flat = flatness(y, tol_rank=tols.rank, tol_psd=tols.psd, tol_feas=tols.primal_feas)
    primal = max(float(np.linalg.norm(localizing_matrix(y))), -min(min_eig(X_bar), 0.0),
                 float(np.linalg.norm(sol.B - B_bar)))
    spectral = spectral or spectral_radius(A, starts=tols.spectral_starts, seed=tols.seed)
    rho_hat = spectral.value
    B_tensor = unflatten(B_bar)

    gates: Dict[str, GateResult] = {
        "rank": _gate_le(rank_B, r),
        "dual_feasibility": _gate_le(feas.residual, tols.dual_feas * scale),
        "dual_psd": _gate_ge(feas.min_eig, -tols.psd * scale),
        "complementarity": _gate_le(complementarity, tols.complementarity * scale),
        "projection": GateResult(
            passed=membership_test(B_bar, MA - sol.U, r, tol=tols.projection * scale, tol_rank=tols.rank),
            value=proj_gap, threshold=tols.projection * scale, margin=tols.projection * scale - proj_gap),
        "duality_gap": _gate_le(abs(gap), tols.gap * scale),
        "primal_feasibility": _gate_le(primal, tols.primal_feas * scale),
    }
    caveats = [RHO_CAVEAT]
    if projection.tie_flag:
        caveats.append("projection non-unique: singular values tie at the rank cut")

    diagnostics = dict(
        duality_gap=gap, psi=psi, phi=phi, dual_feas_residual=feas.residual, psd_min_eig=feas.min_eig,
        complementarity=complementarity, projection_gap=proj_gap, projection_tie=projection.tie_flag,
        rank_B=rank_B, ranks=flat.ranks, flat=flat.flat, rho_hat=rho_hat,
        rho_hat_provenance=spectral.provenance, sigma=sigma,
        residual=hs_norm(A - B_tensor), entry_residual=entry_norm(A - B_tensor),
    )

    if atoms is None and flat.flat:
        try:
            atoms = extract_atoms(y, tol_rank=tols.rank, seed=tols.seed,
                                  tol_psd=tols.psd, tol_feas=tols.primal_feas)
        except (NotFlatError, ExtractionError) as e:
            logger.warning(f"Atom extraction failed during certification: {e}")
            atoms = None

    if flat.flat and flat.rank == r + 1:
        residual_tensor = A - B_tensor
        if np.any(residual_tensor.values):
            bound = spectral_radius(residual_tensor, starts=tols.spectral_starts, seed=tols.seed).value ** 2
        else:
            bound = 0.0
        diagnostics["rank_r_plus_one_bound"] = max(bound, 0.0)
    if sigma == 0 and flat.flat and flat.rank == r + 2 and atoms is not None:
        diagnostics["cancelling_pairs"] = cancelling_pairs(atoms)

    status = CertificateStatus.UNCERTIFIED
    alpha = None
    failing = next((name for name in GATE_ORDER if not gates[name].passed), None)
    if failing is not None:
        reason = f"{failing} gate failed"
    elif sigma == 0 and flat.flat and flat.rank != r + 1:
        status, alpha, reason = CertificateStatus.BEST_RANK_R, 0.0, "all gates passed with sigma = 0"
    elif r == 1:
        gates["sigma_threshold"] = _gate_lt(sigma, rho_hat)
        if gates["sigma_threshold"].passed:
            refinement = rank_one_refine(A, sol, sigma, rho_hat=rho_hat)
            diagnostics["refined_residual"] = refinement.residual
            status, alpha = CertificateStatus.BEST_RANK_R, 0.0
            reason = "rank-one gates passed with sigma below the spectral radius estimate"
        else:
            reason = "sigma_threshold gate failed"
    elif sigma == 0:
        if flat.flat and flat.rank == r + 1:
            reason = "rank r+1 case: only the residual-tensor bound applies"
        else:
            reason = "flatness gate failed"
    else:
        gates["flatness"] = GateResult(
            passed=bool(flat.flat and flat.rank_prev <= r), value=float(flat.rank_prev),
            threshold=float(r), margin=float(r - flat.rank_prev),
        )
        if not gates["flatness"].passed:
            reason = "flatness gate failed"
        elif atoms is None or len(atoms) == 0:
            reason = "extraction gate failed"
        else:
            try:
                tau_value = tau(atoms, r)
            except IllConditionedError as e:
                tau_value = None
                reason = f"conditioning gate failed: {e}"
            if tau_value is not None:
                diagnostics["tau"] = tau_value
                diagnostics["tau_provenance"] = TAU_CAVEAT
                caveats.append(TAU_CAVEAT)
                gates["sigma_threshold"] = _gate_lt(sigma, tau_value * rho_hat / (2 * r))
                if gates["sigma_threshold"].passed:
                    alpha = quasi_alpha(hs_norm(A), r, sigma, tau_value)
                    status = CertificateStatus.QUASI_OPTIMAL
                    reason = "quasi-optimality gates passed"
                else:
                    reason = "sigma_threshold gate failed"
    if alpha is not None:
        diagnostics["alpha"] = alpha

    certificate = Certificate(status=status, alpha=alpha, reason=reason, gates=gates,
                              diagnostics=CertificateDiagnostics(**diagnostics), caveats=caveats)
    logger.info(f"Certificate: {status.value} ({reason}), gap {gap:.3e}")
    return certificate


class Certifier:
    """Turns the selected solution into a certificate."""

    async def certify(self, state: CertificationState) -> CertificationState:
        tensor, rank = state["tensor"], state["rank"]
        certificate = certify(tensor, rank, state["solution"], state.get("tolerances"),
                              atoms=state.get("atoms"))
        msg = f"📜 Certifier: {certificate.status.value} ({certificate.reason})"
        messages = state.get("messages", [])
        messages.append(AIMessage(content=msg))
        state["messages"] = messages
        state["certificate"] = certificate
        return state

    async def run(self, state: CertificationState) -> CertificationState:
        return await self.certify(state)
