"""Brute-force baselines for small instances: sphere sampling and alternating refinement."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .classes.errors import InputError, RefinementUnavailable
from .classes.tensor import AtomicMeasure, SymTensor3
from .nodes.refiner import refine_coefficients
from .utils.tensor_core import ascend, cubic_form, rank_one_full

logger = logging.getLogger(__name__)

GRID_DENSITY = {2: 100_000, 3: 200_000, 4: 1_000_000}
CHUNK = 100_000


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: str
    samples: int
    seed: int
    vector: Optional[np.ndarray] = None
    atoms: Optional[AtomicMeasure] = None
    residual: Optional[float] = None
    extra: dict = field(default_factory=dict)


def sphere_points(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic, roughly uniform points on the unit sphere in R^n."""
    if n == 2:
        theta = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (1 + 5 ** 0.5) * i
        rad = np.sqrt(1 - z ** 2)
        return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    u = sampler.random(count)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def brute_rank_one(A: SymTensor3, grid_density: Optional[int] = None, polish_iters: int = 1_000,
                   top: int = 20, seed: int = 0) -> OracleResult:
    """Max of <A, x^{⊗3}> over a dense sphere sample, best candidates polished by ascent."""
    n = A.n
    if n not in GRID_DENSITY:
        raise InputError(f"brute-force sampling supports 2 <= n <= 4, got n={n}")
    count = grid_density or GRID_DENSITY[n]
    T = A.to_full()
    points = sphere_points(n, count, seed)
    values = np.empty(count)
    for start in range(0, count, CHUNK):
        P = points[start:start + CHUNK]
        values[start:start + CHUNK] = np.einsum("ijk,ni,nj,nk->n", T, P, P, P)
    candidates = np.argsort(values)[::-1][:top]
    best_value, best_x = float(values[candidates[0]]), points[candidates[0]]
    for c in candidates:
        x = ascend(T, points[c], max_iter=polish_iters)
        value = cubic_form(T, x)
        if value > best_value:
            best_value, best_x = value, x
    logger.debug(f"Sphere sampling with {count} points gave {best_value:.10f}")
    return OracleResult(value=best_value, method="grid+polish", samples=count, seed=seed, vector=best_x)


def _best_direction(T: np.ndarray, x0: np.ndarray, rng: np.random.Generator, tries: int = 5) -> np.ndarray:
    best, best_value = None, -np.inf
    for x in [x0] + [rng.standard_normal(T.shape[0]) for _ in range(tries)]:
        x = ascend(T, x, max_iter=2_000)
        value = cubic_form(T, x)
        if value > best_value:
            best, best_value = x, value
    return best


def baseline_rank_r(A: SymTensor3, r: int, starts: int = 10, seed: int = 0,
                    sweeps: int = 200, tol: float = 1e-12) -> OracleResult:
    """Alternating refinement: each vector is re-fit to its residual, then weights by least squares.

    The best residual found is an upper bound on the optimal rank-r residual.
    """
    if r < 1:
        raise InputError(f"rank must be positive, got {r}")
    T = A.to_full()
    n = A.n
    rng = np.random.default_rng(seed)
    best = (np.inf, None, None)
    for s in range(starts):
        F = rng.standard_normal((n, r))
        F /= np.linalg.norm(F, axis=0)
        w = np.array([cubic_form(T, x) for x in F.T])
        previous = np.inf
        for _ in range(sweeps):
            for i in range(r):
                others = sum(w[j] * rank_one_full(F[:, j]) for j in range(r) if j != i) if r > 1 else 0.0
                R = T - others
                F[:, i] = _best_direction(R, F[:, i], rng, tries=1)
                w[i] = cubic_form(R, F[:, i])
            try:
                refinement = refine_coefficients(A, list(F.T))
                w = refinement.weights
                residual = refinement.residual
            except RefinementUnavailable:
                residual = float(np.linalg.norm(T - np.einsum("r,ir,jr,kr->ijk", w, F, F, F)))
            if previous - residual <= tol:
                break
            previous = residual
        if residual < best[0]:
            best = (residual, w.copy(), F.copy())
        logger.debug(f"Baseline start {s}: residual {residual:.10f}")
    residual, w, F = best
    atoms = AtomicMeasure.from_pairs((wi, x) for wi, x in zip(w, F.T) if abs(wi) > 0)
    return OracleResult(value=float(residual), method="multistart-als", samples=starts, seed=seed,
                        atoms=atoms, residual=float(residual))
