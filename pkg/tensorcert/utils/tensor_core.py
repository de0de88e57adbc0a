"""Symmetric 3-tensor arithmetic: flattening, norms, rotations, spectral radius, conditioning."""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..classes.errors import IllConditionedError, InputError
from ..classes.tensor import AtomicMeasure, SymTensor3, cubic_multiplicities

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-10


def flatten(A: SymTensor3) -> np.ndarray:
    """n x n² unfolding with entry (k, (i, j)) = a_{ijk}."""
    n = A.n
    return A.to_full().reshape(n, n * n)


def unflatten(M: np.ndarray) -> SymTensor3:
    """Inverse of ``flatten`` for matrices that come from a symmetric tensor."""
    n = M.shape[0]
    if M.shape != (n, n * n):
        raise InputError(f"expected an n x n² matrix, got {M.shape}")
    T = M.reshape(n, n, n)
    # symmetrize to absorb rounding in solver iterates
    T = (T + T.transpose(0, 2, 1) + T.transpose(1, 0, 2) + T.transpose(1, 2, 0)
         + T.transpose(2, 0, 1) + T.transpose(2, 1, 0)) / 6.0
    return SymTensor3.from_full(T)


def rank_one_full(x: np.ndarray) -> np.ndarray:
    return np.einsum("i,j,k->ijk", x, x, x)


def assemble(atoms: AtomicMeasure, n: int) -> SymTensor3:
    """Sum of weight * x^{⊗3} over the atoms."""
    T = np.zeros((n, n, n))
    for atom in atoms:
        if atom.n != n:
            raise InputError(f"atom of dimension {atom.n} does not match n={n}")
        T += atom.weight * rank_one_full(atom.vector)
    return SymTensor3.from_full(T)


def hs_inner(A: SymTensor3, B: SymTensor3) -> float:
    if A.n != B.n:
        raise InputError("tensor dimensions differ")
    return float(np.sum(cubic_multiplicities(A.n) * A.values * B.values))


def hs_norm(A: SymTensor3) -> float:
    return float(np.sqrt(max(hs_inner(A, A), 0.0)))


def entry_norm(A: SymTensor3) -> float:
    """Euclidean norm over the independent entries only."""
    return float(np.linalg.norm(A.values))


def rotate(Q: np.ndarray, A: SymTensor3) -> SymTensor3:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (A.n, A.n):
        raise InputError(f"rotation must be {A.n} x {A.n}, got {Q.shape}")
    if np.max(np.abs(Q.T @ Q - np.eye(A.n))) > ORTHO_TOL:
        raise InputError("rotation matrix is not orthogonal")
    T = np.einsum("ri,sj,tk,ijk->rst", Q, Q, Q, A.to_full())
    return SymTensor3.from_full(T, tol=1e-8)


def contract(T: np.ndarray, x: np.ndarray) -> np.ndarray:
    """A·x², the gradient direction of x -> <A, x^{⊗3}> up to a factor 3."""
    return np.einsum("ijk,j,k->i", T, x, x)


def cubic_form(T: np.ndarray, x: np.ndarray) -> float:
    return float(x @ contract(T, x))


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    vector: np.ndarray
    starts: int
    seed: int
    provenance: str = "multistart adaptive shifted power ascent (lower bound on the spectral radius)"


def ascend(T: np.ndarray, x0: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Adaptively shifted power ascent for max <A, x^{⊗3}> on the sphere.

    The shift keeps the local Hessian of the shifted form positive definite so
    each step is monotone; stops when the eigen-residual A·x² - f·x vanishes.
    """
    x = x0 / np.linalg.norm(x0)
    if cubic_form(T, x) < 0:
        x = -x
    for _ in range(max_iter):
        g = contract(T, x)
        f = float(x @ g)
        if np.linalg.norm(g - f * x) <= tol * max(1.0, abs(f)):
            break
        hess = 6.0 * np.einsum("ijk,k->ij", T, x)
        shift = max(0.0, (tol - float(np.linalg.eigvalsh(hess)[0])) / 3.0) + 1e-12
        step = g + shift * x
        norm = np.linalg.norm(step)
        if norm == 0:
            break
        x = step / norm
    return x


def spectral_radius(A: SymTensor3, starts: int = 50, seed: int = 0,
                    tol: float = 1e-12, max_iter: int = 10_000) -> SpectralEstimate:
    """Largest <A, x^{⊗3}> over unit x found from random starts."""
    if not np.any(A.values):
        raise InputError("zero tensor has no spectral direction")
    T = A.to_full()
    rng = np.random.default_rng(seed)
    best_value, best_x = -np.inf, None
    for _ in range(starts):
        x = ascend(T, rng.standard_normal(A.n), tol=tol, max_iter=max_iter)
        value = cubic_form(T, x)
        if value > best_value:
            best_value, best_x = value, x
    logger.debug(f"Spectral radius estimate {best_value:.10f} from {starts} starts")
    return SpectralEstimate(value=float(best_value), vector=best_x, starts=starts, seed=seed)


def coherence(vectors: Sequence[np.ndarray]) -> float:
    """Largest absolute inner product between distinct unit vectors."""
    V = np.column_stack([np.asarray(v, dtype=float) for v in vectors]) if len(vectors) else np.zeros((0, 0))
    if V.shape[1] < 2:
        raise InputError("coherence needs at least two vectors")
    G = np.abs(V.T @ V)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def tau(atoms: AtomicMeasure, r: int, kappa_floor: float = 1e-6) -> float:
    """Conditioning constant of a candidate rank-r decomposition.

    Takes the r heaviest atoms as the factor matrix [x_1 ... x_r]. kappa is its
    r-th singular value (zero when fewer than r atoms are given) and contributes
    kappa⁶; the coherence mu contributes 1 - (r-1)mu³ when mu < (1/(r-1))^(1/3).
    The largest of the conditions that hold is returned.
    """
    if len(atoms) == 0:
        raise InputError("tau needs at least one atom")
    if r < 1:
        raise InputError(f"tau needs r >= 1, got {r}")
    if r == 1:
        return 1.0
    if len(atoms) < r:
        # an incomplete factor matrix is rank deficient
        logger.warning(f"tau: only {len(atoms)} atoms for rank {r}, kappa = 0")
        return 0.0
    F = AtomicMeasure(atoms.sorted().atoms[:r]).vectors()
    candidates = []
    kappa = float(np.linalg.svd(F, compute_uv=False)[r - 1]) if r <= F.shape[0] else 0.0
    if kappa > kappa_floor:
        candidates.append(kappa**6)
    mu = coherence(list(F.T))
    if mu < (1.0 / (r - 1)) ** (1.0 / 3.0):
        candidates.append(1.0 - (r - 1) * mu**3)
    if not candidates:
        raise IllConditionedError(
            f"ill-conditioned decomposition: kappa={kappa:.3e}, coherence={mu:.3e}"
        )
    return float(min(1.0, max(candidates)))
