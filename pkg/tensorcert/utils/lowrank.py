"""Rank-r projection, Ky-Fan and nuclear norms, singular value shrinkage."""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..classes.errors import InputError

logger = logging.getLogger(__name__)

TIE_TOL = 1e-9
RANK_TOL = 1e-6


def svd(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD; every singular value computation in the package goes through here."""
    return np.linalg.svd(np.asarray(X, dtype=float), full_matrices=False)


def singular_values(X: np.ndarray) -> np.ndarray:
    return np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)


def numerical_rank(X: np.ndarray, tol: float = RANK_TOL) -> int:
    """Count of singular values above tol * max(sigma_1, 1)."""
    if X.size == 0:
        return 0
    s = singular_values(X)
    return int(np.sum(s > tol * max(float(s[0]), 1.0)))


def _check_rank(X: np.ndarray, r: int):
    if X.ndim != 2 or not 1 <= r <= min(X.shape):
        raise InputError(f"rank {r} out of range for a {X.shape} matrix")


@dataclass(frozen=True)
class ProjectionResult:
    projector: np.ndarray
    residual_sq: float
    theta: float
    singular_values: np.ndarray
    tie_flag: bool


def project_rank(X: np.ndarray, r: int, tol_tie: float = TIE_TOL) -> ProjectionResult:
    """Best rank-r approximation by truncated SVD."""
    X = np.asarray(X, dtype=float)
    _check_rank(X, r)
    U, s, Vt = svd(X)
    Y = (U[:, :r] * s[:r]) @ Vt[:r]
    residual_sq = float(np.sum(s[r:] ** 2))
    tie = bool(r < s.shape[0] and s[r - 1] - s[r] <= tol_tie * max(float(s[0]), 1e-300))
    if tie:
        logger.warning(f"Rank-{r} projection is not unique (sigma_r={s[r - 1]:.6e}, sigma_r+1={s[r]:.6e})")
    theta = 0.5 * float(np.sum(s[:r] ** 2))
    return ProjectionResult(projector=Y, residual_sq=residual_sq, theta=theta,
                            singular_values=s, tie_flag=tie)


def kyfan_norm(X: np.ndarray, r: int) -> float:
    _check_rank(np.asarray(X), r)
    return float(np.sum(singular_values(X)[:r]))


def nuclear_norm(X: np.ndarray) -> float:
    return float(np.sum(singular_values(X)))


def kyfan_subgradient(X: np.ndarray, r: int) -> np.ndarray:
    """Top-r singular vectors P_r Q_rᵀ; zero for the zero matrix."""
    X = np.asarray(X, dtype=float)
    _check_rank(X, r)
    U, s, Vt = svd(X)
    keep = min(r, int(np.sum(s > 0)))
    return U[:, :keep] @ Vt[:keep]


def soft_threshold(A: np.ndarray, t: float) -> np.ndarray:
    """Proximal map of t‖·‖_*: shrink every singular value by t."""
    if not t > 0:
        raise InputError(f"threshold must be positive, got {t}")
    U, s, Vt = svd(A)
    d = np.maximum(s - t, 0.0)
    keep = d > 0
    return (U[:, keep] * d[keep]) @ Vt[keep]


def project_psd(S: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite matrix in Frobenius norm."""
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    return (Q * w) @ Q.T


def min_eig(S: np.ndarray) -> float:
    if S.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def projection_gap(Y: np.ndarray, X: np.ndarray, r: int) -> float:
    """½‖X - Y‖² minus the optimal rank-r value ½ Σ_{i>r} σᵢ²."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.shape != Y.shape:
        raise InputError(f"shape mismatch {Y.shape} vs {X.shape}")
    return 0.5 * float(np.sum((X - Y) ** 2)) - 0.5 * project_rank(X, r).residual_sq


def membership_test(Y: np.ndarray, X: np.ndarray, r: int, tol: float = 1e-6,
                    tol_rank: float = RANK_TOL) -> bool:
    """Y attains the rank-r projection value of X and has rank at most r."""
    return projection_gap(Y, X, r) <= tol and numerical_rank(Y, tol_rank) <= r
