"""Analytic primal-dual pairs for orthogonally decomposable tensors."""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from ..classes.errors import InputError
from ..classes.moment import MomentSequence
from ..classes.solution import PrimalSolution
from ..classes.tensor import Atom, AtomicMeasure, SymTensor3
from ..utils.moments import block_P, index_table, moment_matrix, moments_from_atoms
from ..utils.tensor_core import assemble, flatten
from .solver import RELAXATION_ORDER, evaluate_residuals

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-10


def _complete_basis(F: np.ndarray) -> np.ndarray:
    """Orthogonal Q whose leading columns are the orthonormal columns of F."""
    if F.shape[1] == F.shape[0]:
        return F
    return np.column_stack([F, scipy.linalg.null_space(F.T)])


def _substitution(Q: np.ndarray) -> np.ndarray:
    """T with v(Qᵀx) = T v(x) on the graded basis of degree <= 2."""
    n = Q.shape[0]
    table = index_table(n, 2)
    pos = table.position
    size = len(table.graded_lex)
    T = np.zeros((size, size))
    for a, alpha in enumerate(table.graded_lex):
        factors = [j for j in range(n) for _ in range(alpha[j])]
        if not factors:
            T[a, 0] = 1.0
        elif len(factors) == 1:
            for p in range(n):
                T[a, pos[tuple(int(i == p) for i in range(n))]] += Q[p, factors[0]]
        else:
            j, l = factors
            for p in range(n):
                for q in range(n):
                    e = tuple(int(i == p) + int(i == q) for i in range(n))
                    T[a, pos[e]] += Q[p, j] * Q[q, l]
    return T


def sphere_dual_triple(vectors: np.ndarray, sigma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dual point (U, W, Z) attached to orthonormal vectors x₁..x_r.

    u(x) = σ Σ (xᵢᵀx)³ and w(x) = -(3σ/2) xᵀx, so that with t = Qᵀx
    z = σ(1 - Σ_{i<=r} tᵢ³ + 1.5‖t‖⁴ - 1.5‖t‖²), written with an explicit
    positive semidefinite Gram matrix.
    """
    F = np.asarray(vectors, dtype=float)
    n, r = F.shape
    if np.max(np.abs(F.T @ F - np.eye(r))) > ORTHONORMAL_TOL:
        raise InputError("vectors are not orthonormal")
    table = index_table(n, 2)
    pos = table.position
    size = len(table.graded_lex)

    def unit(*idx):
        return tuple(sum(1 for i in idx if i == j) for j in range(n))

    gram = np.zeros((size, size))
    gram[0, 0] = 1.0
    for j in range(n):
        jj = pos[unit(j, j)]
        gram[0, jj] = gram[jj, 0] = -1.0
        gram[pos[unit(j)], pos[unit(j)]] = 0.5
        for l in range(n):
            gram[jj, pos[unit(l, l)]] = 1.5 if l == j else 1.0
        for l in range(j + 1, n):
            gram[pos[unit(j, l)], pos[unit(j, l)]] = 1.0
        if j < r:
            gram[pos[unit(j)], jj] = gram[jj, pos[unit(j)]] = -0.5
    T = _substitution(_complete_basis(F))
    Z = sigma * (T.T @ gram @ T)
    Z = 0.5 * (Z + Z.T)

    U = sigma * flatten(assemble(AtomicMeasure(tuple(Atom(1.0, x) for x in F.T)), n))
    W = np.zeros((n + 1, n + 1))
    W[1:, 1:] = -1.5 * sigma * np.eye(n)
    return U, W, Z


@dataclass(frozen=True)
class OdecoCertificate:
    tensor: SymTensor3
    best: SymTensor3
    y: MomentSequence
    B: np.ndarray
    X: np.ndarray
    U: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    sigma: float
    r: int

    def solution(self, rho: float = 1.0) -> PrimalSolution:
        V = -self.Z.copy()
        V[0, 0] += self.sigma
        B = self.B
        psi = 0.5 * float(np.sum((flatten(self.tensor) - B) ** 2)) + self.sigma * float(self.X[0, 0])
        residuals = evaluate_residuals(self.tensor, self.r, B, self.X, self.y, self.U, V, self.W, self.sigma)
        return PrimalSolution(B=B, X=self.X, y=self.y, U=self.U, V=V, W=self.W, sigma=self.sigma,
                              rho=rho, psi=psi, residuals=residuals)


def odeco_certificate(atoms: AtomicMeasure, r: int, sigma: float) -> OdecoCertificate:
    """Closed-form optimal primal-dual pair for A = Σ λᵢ xᵢ^{⊗3} with orthonormal xᵢ.

    The primal measure keeps the r heaviest atoms with weights λᵢ - σ.
    """
    if len(atoms) == 0:
        raise InputError("odeco certificate needs at least one atom")
    ordered = atoms.sorted()
    n = ordered.atoms[0].n
    F = ordered.vectors()
    if np.max(np.abs(F.T @ F - np.eye(len(ordered)))) > ORTHONORMAL_TOL:
        raise InputError("odeco atoms must be pairwise orthonormal")
    if not 1 <= r <= len(ordered):
        raise InputError(f"rank {r} out of range for {len(ordered)} atoms")
    lam = ordered.weights
    gap = lam[r - 1] - (lam[r] if r < len(lam) else 0.0)
    if not 0 <= sigma <= gap:
        raise InputError(f"sigma={sigma} outside [0, {gap}]")

    tensor = assemble(ordered, n)
    kept = AtomicMeasure(ordered.atoms[:r])
    shrunk = AtomicMeasure(tuple(Atom(a.weight - sigma, a.vector) for a in kept if a.weight > sigma))
    y = moments_from_atoms(shrunk, n, RELAXATION_ORDER)
    U, W, Z = sphere_dual_triple(F[:, :r], sigma)
    logger.debug(f"Built odeco certificate for n={n}, r={r}, sigma={sigma}")
    return OdecoCertificate(tensor=tensor, best=assemble(kept, n), y=y, B=block_P(y), X=moment_matrix(y),
                            U=U, W=W, Z=Z, sigma=sigma, r=r)
