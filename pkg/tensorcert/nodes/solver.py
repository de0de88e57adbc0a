import asyncio
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from langchain_core.messages import AIMessage

from ..classes.errors import InputError
from ..classes.moment import MomentSequence
from ..classes.solution import MultistartConfig, PrimalSolution, SolverOptions, SolverResiduals
from ..classes.state import CertificationState
from ..classes.tensor import AtomicMeasure, SymTensor3
from ..utils.lowrank import (
    kyfan_norm,
    kyfan_subgradient,
    min_eig,
    nuclear_norm,
    project_psd,
    projection_gap,
    singular_values,
    soft_threshold,
)
from ..utils.moments import MomentOperators, moment_operators, moments_from_atoms
from ..utils.tensor_core import flatten
from .certifier import dual_objective

logger = logging.getLogger(__name__)

RELAXATION_ORDER = 2
DIVERGENCE_BOUND = 1e8


@lru_cache(maxsize=32)
def _y_maps(n: int, beta: float, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dense maps of the y-step, H⁻¹P*, H⁻¹M*, H⁻¹L* and γH⁻¹, for H = β(P*P + M*M + L*L) + γI."""
    ops = moment_operators(n, RELAXATION_ORDER)
    pp, mm, ll = ops.pp.toarray(), ops.mm.toarray(), ops.ll.toarray()
    H = beta * (pp.T @ pp + mm.T @ mm + ll.T @ ll) + gamma * np.eye(ops.length)
    factor = scipy.linalg.cho_factor(H)
    return (scipy.linalg.cho_solve(factor, pp.T), scipy.linalg.cho_solve(factor, mm.T),
            scipy.linalg.cho_solve(factor, ll.T), gamma * scipy.linalg.cho_solve(factor, np.eye(ops.length)))


@dataclass
class _Iterate:
    B: np.ndarray
    X: np.ndarray
    y: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray


class _Operators:
    """Dense matrix views of the moment maps for one dimension."""

    def __init__(self, ops: MomentOperators):
        self.ops = ops
        self.n = ops.n
        self.pp = ops.pp.toarray()
        self.mm = ops.mm.toarray()
        self.ll = ops.ll.toarray()

    def P(self, y):
        return (self.pp @ y).reshape(self.n, self.n * self.n)

    def M(self, y):
        return (self.mm @ y).reshape(self.ops.size_m, self.ops.size_m)

    def L(self, y):
        return (self.ll @ y).reshape(self.ops.size_l, self.ops.size_l)

    def adjoint_residual(self, U, V, W):
        """P*(U) - M*(V) - L*(W); zero at a dual feasible point."""
        return self.pp.T @ U.ravel() - self.mm.T @ V.ravel() - self.ll.T @ W.ravel()


def dc_objective(MA: np.ndarray, B: np.ndarray, X: np.ndarray, r: int, sigma: float, rho: float) -> float:
    """½‖M(A) - B‖² + σ X₀₀ + ρ(‖B‖_* - ‖B‖_(r))."""
    return (0.5 * float(np.sum((MA - B) ** 2)) + sigma * float(X[0, 0])
            + rho * (nuclear_norm(B) - kyfan_norm(B, r)))


def _initial_moments(n: int, r: int, opts: SolverOptions) -> np.ndarray:
    length = moment_operators(n, RELAXATION_ORDER).length
    if opts.init == "zero":
        return np.zeros(length)
    if opts.init == "warm_start":
        y = np.asarray(opts.warm_start, dtype=float)
        if y.shape != (length,):
            raise InputError(f"warm start needs {length} moments, got {y.shape}")
        return y
    rng = np.random.default_rng(opts.seed)
    vectors = rng.standard_normal((r, n))
    measure = AtomicMeasure.from_pairs((1.0, v) for v in vectors)
    return moments_from_atoms(measure, n, RELAXATION_ORDER).values.copy()


def _admm(MA: np.ndarray, C: np.ndarray, it: _Iterate, ops: _Operators, opts: SolverOptions,
          rho: float) -> Tuple[_Iterate, int, bool, float]:
    """sGS-ADMM on the convexified subproblem for a fixed Ky-Fan linearization C.

    One sweep updates y, B, y (backward/forward over the first block), then X,
    then the multipliers with steplength τ. Returned multipliers are the ones
    implied by the last B- and X-steps, which satisfy those optimality lines
    exactly.
    """
    beta, tau, gamma, sigma = opts.admm_penalty, opts.steplength, opts.proximal, opts.sigma
    Sp, Sm, Sl, Sg = _y_maps(ops.n, beta, gamma)
    E0 = ops.ops.E0
    shrink = rho / (1.0 + beta)
    scale = 1.0 + float(np.linalg.norm(MA))
    B, X, y, U, V, W = it.B, it.X, it.y, it.U, it.V, it.W
    U_hat, V_hat, W_hat = U, V, W
    eta = np.inf

    def y_step(B, X, y_prev):
        return Sp @ (U + beta * B).ravel() - Sm @ (V - beta * X).ravel() - Sl @ W.ravel() + Sg @ y_prev

    for k in range(1, opts.max_admm_iters + 1):
        y_tilde = y_step(B, X, y)
        Py_tilde = ops.P(y_tilde)
        B = soft_threshold((MA + rho * C - U + beta * Py_tilde) / (1.0 + beta), shrink)
        U_hat = U + beta * (B - Py_tilde)

        y = y_step(B, X, y_tilde)
        My = ops.M(y)
        X = project_psd(My + (V - sigma * E0) / beta)
        V_hat = V + beta * (My - X)
        Ly = ops.L(y)
        W_hat = W + beta * Ly
        Py = ops.P(y)

        U = U + tau * beta * (B - Py)
        V = V + tau * beta * (My - X)
        W = W + tau * beta * Ly

        if k % opts.check_every == 0:
            if not np.all(np.isfinite(y)) or np.linalg.norm(y) > DIVERGENCE_BOUND:
                logger.warning(f"ADMM iterate diverged at iteration {k}")
                return _Iterate(B, X, y, U_hat, V_hat, W_hat), k, False, np.inf
            primal = max(np.linalg.norm(B - Py), np.linalg.norm(X - My), np.linalg.norm(Ly))
            dual = np.linalg.norm(ops.adjoint_residual(U_hat, V_hat, W_hat))
            eta = max(primal, dual) / scale
            if eta <= opts.tol_kkt:
                return _Iterate(B, X, y, U_hat, V_hat, W_hat), k, True, eta
    return _Iterate(B, X, y, U_hat, V_hat, W_hat), opts.max_admm_iters, False, eta


def _residuals(MA: np.ndarray, r: int, it: _Iterate, ops: _Operators, sigma: float) -> SolverResiduals:
    Py, My, Ly = ops.P(it.y), ops.M(it.y), ops.L(it.y)
    Z = -it.V.copy()
    Z[0, 0] += sigma
    tail = singular_values(Py)[r:]
    return SolverResiduals(
        primal_feas=float(max(np.linalg.norm(it.B - Py), np.linalg.norm(it.X - My), np.linalg.norm(Ly))),
        dual_feas=float(np.linalg.norm(ops.adjoint_residual(it.U, it.V, it.W))),
        psd_residual=float(max(-min(min_eig(Z), 0.0), -min(min_eig(it.X), 0.0),
                               abs(float(np.sum(Z * it.X))))),
        rank_residual=float(max(projection_gap(Py, MA - it.U, r), 0.0) + np.sum(tail)),
        dca_gap=float(nuclear_norm(it.B) - kyfan_norm(it.B, r)),
    )


def evaluate_residuals(A: SymTensor3, r: int, B: np.ndarray, X: np.ndarray, y: MomentSequence,
                       U: np.ndarray, V: np.ndarray, W: np.ndarray, sigma: float) -> SolverResiduals:
    """Residual record of an arbitrary (B, X, y, U, V, W), e.g. an analytically built point."""
    ops = _Operators(moment_operators(A.n, RELAXATION_ORDER))
    return _residuals(flatten(A), r, _Iterate(B, X, y.values, U, V, W), ops, sigma)


def solve(A: SymTensor3, r: int, opts: Optional[SolverOptions] = None) -> PrimalSolution:
    """Penalized DCA with an sGS-ADMM inner solver for the rank-r moment relaxation."""
    opts = opts or SolverOptions()
    n = A.n
    if n < 2:
        raise InputError("the solver needs dimension n >= 2")
    if not 1 <= r <= n:
        raise InputError(f"rank must satisfy 1 <= r <= n = {n}, got {r}")

    ops = _Operators(moment_operators(n, RELAXATION_ORDER))
    MA = flatten(A)
    scale = 1.0 + float(np.linalg.norm(MA))
    y = _initial_moments(n, r, opts)
    it = _Iterate(
        B=ops.P(y), X=ops.M(y), y=y,
        U=np.zeros((n, n * n)),
        V=np.zeros((ops.ops.size_m, ops.ops.size_m)),
        W=np.zeros((ops.ops.size_l, ops.ops.size_l)),
    )

    rho = opts.rho_pen
    history: List[float] = []
    admm_total = 0
    inner_ok = False
    dca_ok = False
    objective_prev = np.inf
    t = 0
    for t in range(1, opts.max_dca_iters + 1):
        C = kyfan_subgradient(it.B, r)
        it, used, inner_ok, eta = _admm(MA, C, it, ops, opts, rho)
        admm_total += used
        objective = dc_objective(MA, it.B, it.X, r, opts.sigma, rho)
        history.append(objective)
        gap = nuclear_norm(it.B) - kyfan_norm(it.B, r)
        logger.debug(f"DCA step {t}: objective {objective:.10e}, Ky-Fan gap {gap:.3e}, "
                     f"ADMM iterations {used}, KKT {eta:.3e}")
        if objective - objective_prev > 10 * opts.tol_kkt * scale ** 2:
            logger.warning(f"DCA objective increased by {objective - objective_prev:.3e} at step {t}")
        if abs(objective_prev - objective) <= opts.tol_dca * max(1.0, abs(objective)) and gap <= opts.tol_dca * scale:
            dca_ok = True
            break
        if opts.rho_escalation and gap > opts.tol_dca * scale and abs(objective_prev - objective) <= opts.tol_dca * max(1.0, abs(objective)):
            rho = min(10.0 * rho, opts.rho_max)
            logger.info(f"Raising DC penalty to {rho:g}")
        objective_prev = objective

    converged = dca_ok and inner_ok
    if not converged:
        logger.warning(f"Solver stopped without convergence after {t} DCA steps (ADMM ok: {inner_ok})")
    psi = 0.5 * float(np.sum((MA - it.B) ** 2)) + opts.sigma * float(it.X[0, 0])
    return PrimalSolution(
        B=it.B, X=it.X, y=MomentSequence(n, RELAXATION_ORDER, it.y),
        U=it.U, V=it.V, W=it.W,
        sigma=opts.sigma, rho=rho, psi=psi,
        residuals=_residuals(MA, r, it, ops, opts.sigma),
        converged=converged, dca_iterations=t, admm_iterations=admm_total,
        seed=opts.seed, history=history,
    )


@dataclass(frozen=True)
class KKTResiduals:
    psd_complementarity: float
    subgradient: float
    adjoint: float
    primal: float

    def max(self) -> float:
        return max(self.psd_complementarity, self.subgradient, self.adjoint, self.primal)


def kkt_residuals(A: SymTensor3, r: int, sol: PrimalSolution, C: np.ndarray) -> KKTResiduals:
    """Violation of each line of the optimality system of the linearized subproblem."""
    n = A.n
    if sol.B.shape != (n, n * n) or C.shape != sol.B.shape:
        raise InputError("solution shapes do not match the tensor")
    ops = _Operators(moment_operators(n, RELAXATION_ORDER))
    MA = flatten(A)
    y = sol.y.values
    Z = sol.Z
    psd = max(-min(min_eig(Z), 0.0), -min(min_eig(sol.X), 0.0), abs(float(np.sum(Z * sol.X))))

    G = C + (MA - sol.U - sol.B) / sol.rho
    op_norm = float(singular_values(G)[0]) if G.any() else 0.0
    subgradient = max(op_norm - 1.0, 0.0) + abs(float(np.sum(G * sol.B)) - nuclear_norm(sol.B))

    adjoint = float(np.linalg.norm(ops.adjoint_residual(sol.U, sol.V, sol.W)))
    primal = float(max(np.linalg.norm(sol.B - ops.P(y)), np.linalg.norm(sol.X - ops.M(y)),
                       np.linalg.norm(ops.L(y))))
    return KKTResiduals(psd_complementarity=psd, subgradient=subgradient, adjoint=adjoint, primal=primal)


def select_best(A: SymTensor3, r: int, candidates: List[PrimalSolution]) -> Tuple[int, PrimalSolution]:
    """Smallest duality gap, then smallest objective, then lowest start index."""
    if not candidates:
        raise InputError("no candidate solutions to select from")

    def key(item):
        index, sol = item
        return (sol.psi - dual_objective(sol.U, A, r), sol.psi, index)

    return min(enumerate(candidates), key=key)


class SolverNode:
    """Runs the multistart solve and keeps the best start."""

    async def solve(self, state: CertificationState) -> CertificationState:
        tensor = state["tensor"]
        rank = state["rank"]
        opts = state.get("options") or SolverOptions()
        multistart = state.get("multistart") or MultistartConfig()
        logger.info(f"Solving rank-{rank} relaxation for n={tensor.n} with {multistart.starts} start(s)")

        runs = [
            opts.model_copy(update={"seed": multistart.seed + i}) if opts.init == "random_atoms" else opts
            for i in range(multistart.starts)
        ]
        candidates = await asyncio.gather(*(asyncio.to_thread(solve, tensor, rank, o) for o in runs))
        index, best = select_best(tensor, rank, list(candidates))

        msg = (f"🧮 Solver: start {index} selected, psi={best.psi:.8e}, "
               f"converged={best.converged}, DCA steps={best.dca_iterations}")
        logger.info(msg)
        messages = state.get("messages", [])
        messages.append(AIMessage(content=msg))
        state["messages"] = messages
        state["solution"] = best
        state["candidates"] = list(candidates)
        return state

    async def run(self, state: CertificationState) -> CertificationState:
        return await self.solve(state)
