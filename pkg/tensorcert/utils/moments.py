"""Moment, extended moment and localizing matrices over the unit sphere; flatness and atom extraction."""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement, product
from math import ceil, comb
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..classes.errors import ExtractionError, InputError, NotFlatError
from ..classes.moment import MomentSequence, moment_length
from ..classes.tensor import AtomicMeasure
from .lowrank import RANK_TOL, min_eig, singular_values

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]


def _exponent(indices: Tuple[int, ...], n: int) -> Exponent:
    e = [0] * n
    for i in indices:
        e[i] += 1
    return tuple(e)


@dataclass(frozen=True)
class IndexTable:
    """Graded-lex monomial exponents and the tensor multi-indices I^{≤s} of length at most s."""

    n: int
    s: int
    graded_lex: Tuple[Exponent, ...] = field(repr=False)
    tensor_index: Tuple[Tuple[int, ...], ...] = field(repr=False)
    position: Mapping[Exponent, int] = field(repr=False)

    @property
    def nu(self) -> int:
        """Cardinality of I^{≤s}, (n^{s+1} - 1)/(n - 1); the side of the extended moment matrix."""
        if self.n == 1:
            return self.s + 1
        return (self.n ** (self.s + 1) - 1) // (self.n - 1)

    @property
    def zeta(self) -> int:
        """Number of distinct degree-s monomials."""
        return comb(self.n + self.s - 1, self.n - 1)


@lru_cache(maxsize=None)
def index_table(n: int, s: int) -> IndexTable:
    graded = tuple(
        _exponent(combo, n)
        for degree in range(s + 1)
        for combo in combinations_with_replacement(range(n), degree)
    )
    return IndexTable(
        n=n,
        s=s,
        graded_lex=graded,
        tensor_index=tuple(t for degree in range(s + 1) for t in product(range(n), repeat=degree)),
        position={alpha: p for p, alpha in enumerate(graded)},
    )


def _add(*exponents: Exponent) -> Exponent:
    return tuple(int(sum(c)) for c in zip(*exponents))


def _unit(n: int, i: int, power: int = 1) -> Exponent:
    return tuple(power if j == i else 0 for j in range(n))


def sphere_polynomial(n: int) -> Dict[Exponent, float]:
    """g(x) = 1 - xᵀx as an exponent -> coefficient map."""
    g = {tuple([0] * n): 1.0}
    for i in range(n):
        g[_unit(n, i, 2)] = -1.0
    return g


def _localizing_operator(n: int, k: int, g: Mapping[Exponent, float]) -> Tuple[sp.csr_matrix, int]:
    degree = max(sum(gamma) for gamma in g)
    order = k - ceil(degree / 2)
    if order < 0:
        raise InputError(f"polynomial of degree {degree} needs relaxation order above {k}")
    basis = index_table(n, order).graded_lex
    full = index_table(n, 2 * k).position
    size = len(basis)
    rows, cols, vals = [], [], []
    for a, alpha in enumerate(basis):
        for b, beta in enumerate(basis):
            for gamma, coef in g.items():
                if coef == 0:
                    continue
                rows.append(a * size + b)
                cols.append(full[_add(alpha, beta, gamma)])
                vals.append(float(coef))
    op = sp.coo_matrix((vals, (rows, cols)), shape=(size * size, len(full))).tocsr()
    return op, size


@dataclass(frozen=True)
class MomentOperators:
    """Sparse linear maps y -> vec(M_k(y)), vec(G_k(y)), vec(P_k(y)), vec(L_k(y)) for fixed (n, k)."""

    n: int
    k: int
    table: IndexTable = field(repr=False)
    mm: sp.csr_matrix = field(repr=False)
    gg: sp.csr_matrix = field(repr=False)
    pp: sp.csr_matrix = field(repr=False)
    ll: sp.csr_matrix = field(repr=False)
    size_m: int = 0
    size_g: int = 0
    size_l: int = 0

    @property
    def length(self) -> int:
        return moment_length(self.n, 2 * self.k)

    @property
    def E0(self) -> np.ndarray:
        E = np.zeros((self.size_m, self.size_m))
        E[0, 0] = 1.0
        return E


@lru_cache(maxsize=None)
def moment_operators(n: int, k: int) -> MomentOperators:
    if n < 1 or k < 1:
        raise InputError(f"invalid moment operator shape n={n}, k={k}")
    table = index_table(n, k)
    full = index_table(n, 2 * k).position
    m = len(full)

    basis = table.graded_lex
    size_m = len(basis)
    rows = np.arange(size_m * size_m)
    cols = [full[_add(a, b)] for a in basis for b in basis]
    mm = sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(size_m * size_m, m))

    tuples = table.tensor_index
    size_g = table.nu
    exps = [_exponent(t, n) for t in tuples]
    cols = [full[_add(a, b)] for a in exps for b in exps]
    gg = sp.csr_matrix((np.ones(len(cols)), (np.arange(size_g * size_g), cols)), shape=(size_g * size_g, m))

    cols = [full[_add(_unit(n, kk), _unit(n, i), _unit(n, j))]
            for kk in range(n) for i in range(n) for j in range(n)]
    pp = sp.csr_matrix((np.ones(len(cols)), (np.arange(n ** 3), cols)), shape=(n ** 3, m))

    ll, size_l = _localizing_operator(n, k, sphere_polynomial(n))
    logger.debug(f"Built moment operators for n={n}, k={k}: {m} moments, M_k of size {size_m}")
    return MomentOperators(n=n, k=k, table=table, mm=mm, gg=gg, pp=pp, ll=ll,
                           size_m=size_m, size_g=size_g, size_l=size_l)


def _ops(y: MomentSequence) -> MomentOperators:
    return moment_operators(y.n, y.k)


def moment_matrix(y: MomentSequence) -> np.ndarray:
    ops = _ops(y)
    return (ops.mm @ y.values).reshape(ops.size_m, ops.size_m)


def extended_moment_matrix(y: MomentSequence) -> np.ndarray:
    ops = _ops(y)
    return (ops.gg @ y.values).reshape(ops.size_g, ops.size_g)


def block_P(y: MomentSequence) -> np.ndarray:
    """Rows indexed by I¹, columns by I²: the flattening of the degree-3 moments."""
    n = y.n
    return (_ops(y).pp @ y.values).reshape(n, n * n)


def localizing_matrix(y: MomentSequence, g: Optional[Mapping[Exponent, float]] = None) -> np.ndarray:
    """Localizing matrix of g, entry (α, β) = Σ_γ g_γ y_{α+β+γ}; defaults to g = 1 - xᵀx."""
    if g is None:
        ops = _ops(y)
        return (ops.ll @ y.values).reshape(ops.size_l, ops.size_l)
    op, size = _localizing_operator(y.n, y.k, dict(g))
    return (op @ y.values).reshape(size, size)


def _square(Z: np.ndarray, size: int, name: str) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (size, size):
        raise InputError(f"{name} must be {size} x {size}, got {Z.shape}")
    return Z.ravel()


def adjoint_M(Z: np.ndarray, n: int, k: int) -> np.ndarray:
    ops = moment_operators(n, k)
    return ops.mm.T @ _square(Z, ops.size_m, "Z")


def adjoint_L(W: np.ndarray, n: int, k: int) -> np.ndarray:
    ops = moment_operators(n, k)
    return ops.ll.T @ _square(W, ops.size_l, "W")


def adjoint_P(U: np.ndarray, n: int, k: int) -> np.ndarray:
    ops = moment_operators(n, k)
    U = np.asarray(U, dtype=float)
    if U.shape != (n, n * n):
        raise InputError(f"U must be {n} x {n * n}, got {U.shape}")
    return ops.pp.T @ U.ravel()


def monomials(points: np.ndarray, n: int, degree: int) -> np.ndarray:
    """Rows x^α for every point (rows of ``points``) and every |α| <= degree."""
    E = np.array(index_table(n, degree).graded_lex, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.prod(points[:, None, :] ** E[None, :, :], axis=2)


def moments_from_atoms(measure: AtomicMeasure, n: int, k: int) -> MomentSequence:
    if len(measure) == 0:
        return MomentSequence.zeros(n, k)
    if any(atom.n != n for atom in measure):
        raise InputError(f"atom dimension does not match n={n}")
    V = monomials(measure.vectors().T, n, 2 * k)
    return MomentSequence(n, k, measure.weights @ V)


@dataclass(frozen=True)
class FlatnessReport:
    rank_prev: int
    rank: int
    flat: bool
    psd_min_eig: float
    localizing_norm: float

    @property
    def ranks(self) -> Tuple[int, int]:
        return self.rank_prev, self.rank


def _rank(S: np.ndarray, tol_rank: float) -> int:
    if S.size == 0:
        return 0
    s = singular_values(S)
    return int(np.sum(s > tol_rank * max(float(s[0]), 1.0)))


def flatness(y: MomentSequence, tol_rank: float = RANK_TOL, tol_psd: float = 1e-8,
             tol_feas: float = 1e-6) -> FlatnessReport:
    """rank M_{k-1}(y) = rank M_k(y) together with M_k(y) ⪰ 0 and L_k(y) = 0."""
    M = moment_matrix(y)
    prev = moment_length(y.n, y.k - 1)
    scale = max(1.0, float(np.linalg.norm(M)))
    rank_prev = _rank(M[:prev, :prev], tol_rank)
    rank = _rank(M, tol_rank)
    lowest = min_eig(M)
    loc = float(np.linalg.norm(localizing_matrix(y)))
    flat = rank_prev == rank and lowest >= -tol_psd * scale and loc <= tol_feas * scale
    return FlatnessReport(rank_prev=rank_prev, rank=rank, flat=bool(flat),
                          psd_min_eig=lowest, localizing_norm=loc)


def extract_atoms(y: MomentSequence, tol_rank: float = RANK_TOL, seed: int = 0,
                  tol_extract: float = 1e-6, tol_sphere: float = 1e-6,
                  tol_psd: float = 1e-8, tol_feas: float = 1e-6) -> AtomicMeasure:
    """Recover the atomic measure represented by a flat moment sequence.

    Factor M_k = VVᵀ, form the multiplication matrices N_i = V₀⁺V_i on the
    degree <= k-1 rows, simultaneously triangularize a random convex
    combination with an ordered real Schur form, and read coordinates off the
    diagonals. Weights come from least squares against all moments.
    """
    report = flatness(y, tol_rank=tol_rank, tol_psd=tol_psd, tol_feas=tol_feas)
    if not report.flat:
        raise NotFlatError(
            f"moment sequence is not flat: ranks {report.ranks}, min eig {report.psd_min_eig:.3e}, "
            f"localizing norm {report.localizing_norm:.3e}"
        )
    r = report.rank
    if r == 0:
        return AtomicMeasure()

    n, k = y.n, y.k
    M = moment_matrix(y)
    w, Q = np.linalg.eigh(M)
    order = np.argsort(w)[::-1][:r]
    V = Q[:, order] * np.sqrt(np.maximum(w[order], 0.0))

    table = index_table(n, k)
    base = table.graded_lex[: moment_length(n, k - 1)]
    V0 = V[: len(base)]
    s0 = singular_values(V0)
    if s0[-1] <= tol_rank * max(float(s0[0]), 1.0):
        raise ExtractionError("base block of the factor is rank deficient",
                              {"singular_values": s0.tolist(), "rank": r})
    pinv = np.linalg.pinv(V0)
    shifts = []
    for i in range(n):
        rows = [table.position[_add(beta, _unit(n, i))] for beta in base]
        shifts.append(pinv @ V[rows])

    rng = np.random.default_rng(seed)
    c = rng.random(n)
    c /= c.sum()
    combo = sum(ci * Ni for ci, Ni in zip(c, shifts))
    T, S = scipy.linalg.schur(combo, output="real")
    sub = np.abs(np.diag(T, -1)) if r > 1 else np.zeros(0)
    if sub.size and sub.max() > 1e-6 * max(1.0, float(np.abs(T).max())):
        raise ExtractionError("multiplication matrix has complex eigenvalues",
                              {"subdiagonal": sub.tolist()})
    points = np.array([[float((S.T @ Ni @ S)[j, j]) for Ni in shifts] for j in range(r)])

    norms = np.linalg.norm(points, axis=1)
    if np.any(np.abs(norms - 1.0) > 10 * tol_sphere):
        raise ExtractionError("extracted points are off the unit sphere", {"norms": norms.tolist()})
    points = points / norms[:, None]

    vandermonde = monomials(points, n, 2 * k).T
    weights, *_ = np.linalg.lstsq(vandermonde, y.values, rcond=None)
    if np.any(weights <= 0):
        raise ExtractionError("extracted weights are not positive", {"weights": weights.tolist()})

    measure = AtomicMeasure.from_pairs(zip(weights, points))
    error = float(np.linalg.norm(moments_from_atoms(measure, n, k).values - y.values))
    if error > tol_extract * max(1.0, float(np.linalg.norm(y.values))):
        raise ExtractionError(f"extracted atoms reproduce the moments only to {error:.3e}",
                              {"roundtrip_error": error, "weights": weights.tolist()})
    logger.debug(f"Extracted {len(measure)} atoms, round-trip error {error:.3e}")
    return measure.sorted()
