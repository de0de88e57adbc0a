from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement, permutations
from math import factorial
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import InputError

UNIT_TOL = 1e-10
MERGE_TOL = 1e-8


@lru_cache(maxsize=None)
def cubic_indices(n: int) -> Tuple[Tuple[int, int, int], ...]:
    """Sorted index triples i <= j <= k, in storage order."""
    return tuple(combinations_with_replacement(range(n), 3))


@lru_cache(maxsize=None)
def cubic_multiplicities(n: int) -> np.ndarray:
    """Number of distinct permutations of each stored triple."""
    mult = []
    for idx in cubic_indices(n):
        counts = [idx.count(i) for i in set(idx)]
        mult.append(factorial(3) // int(np.prod([factorial(c) for c in counts])))
    out = np.asarray(mult, dtype=float)
    out.setflags(write=False)
    return out


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class SymTensor3:
    """Third-order symmetric tensor stored by its independent entries."""

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"dimension must be positive, got {self.n}")
        values = np.asarray(self.values, dtype=float).ravel()
        if values.shape[0] != len(cubic_indices(self.n)):
            raise InputError(
                f"expected {len(cubic_indices(self.n))} independent entries for n={self.n}, "
                f"got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("tensor entries must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, n: int) -> "SymTensor3":
        return cls(n, np.zeros(len(cubic_indices(n))))

    @classmethod
    def from_entries(cls, n: int, entries: Dict[Tuple[int, int, int], float]) -> "SymTensor3":
        """Build from a map of 0-based index triples; each triple may be in any order."""
        position = {idx: p for p, idx in enumerate(cubic_indices(n))}
        values = np.zeros(len(position))
        seen = set()
        for idx, val in entries.items():
            key = tuple(sorted(int(i) for i in idx))
            if len(key) != 3 or key[0] < 0 or key[-1] >= n:
                raise InputError(f"index {idx} out of range for n={n}")
            if key in seen:
                raise InputError(f"duplicate tensor index {idx}")
            seen.add(key)
            values[position[key]] = float(val)
        return cls(n, values)

    @classmethod
    def from_full(cls, T: np.ndarray, tol: float = 1e-10) -> "SymTensor3":
        T = np.asarray(T, dtype=float)
        if T.ndim != 3 or len(set(T.shape)) != 1:
            raise InputError(f"expected an n x n x n array, got shape {T.shape}")
        scale = max(1.0, float(np.max(np.abs(T))) if T.size else 1.0)
        for perm in permutations(range(3)):
            if np.max(np.abs(T - T.transpose(perm))) > tol * scale:
                raise InputError("array is not symmetric")
        n = T.shape[0]
        return cls(n, np.array([T[idx] for idx in cubic_indices(n)]))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, low: float = 0.0, high: float = 1.0) -> "SymTensor3":
        return cls(n, rng.uniform(low, high, size=len(cubic_indices(n))))

    def to_full(self) -> np.ndarray:
        T = np.zeros((self.n,) * 3)
        for value, idx in zip(self.values, cubic_indices(self.n)):
            for perm in set(permutations(idx)):
                T[perm] = value
        return T

    def entries(self) -> Dict[Tuple[int, int, int], float]:
        return {idx: float(v) for idx, v in zip(cubic_indices(self.n), self.values)}

    def _check(self, other: "SymTensor3"):
        if not isinstance(other, SymTensor3) or other.n != self.n:
            raise InputError("tensor dimensions differ")

    def __add__(self, other: "SymTensor3") -> "SymTensor3":
        self._check(other)
        return SymTensor3(self.n, self.values + other.values)

    def __sub__(self, other: "SymTensor3") -> "SymTensor3":
        self._check(other)
        return SymTensor3(self.n, self.values - other.values)

    def __mul__(self, c: float) -> "SymTensor3":
        return SymTensor3(self.n, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor3":
        return SymTensor3(self.n, -self.values)


@dataclass(frozen=True)
class Atom:
    """A weighted unit vector, i.e. one Dirac mass of an atomic measure."""

    weight: float
    vector: np.ndarray

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=float).ravel()
        if not self.weight > 0:
            raise InputError(f"atom weight must be positive, got {self.weight}")
        if abs(np.linalg.norm(vector) - 1.0) > UNIT_TOL:
            raise InputError(f"atom vector must have unit norm, got {np.linalg.norm(vector):.3e}")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "vector", _frozen(vector))

    @classmethod
    def create(cls, weight: float, vector: Sequence[float]) -> "Atom":
        """Normalize to a unit vector with positive weight, keeping weight * x^{⊗3} fixed."""
        vector = np.asarray(vector, dtype=float).ravel()
        norm = np.linalg.norm(vector)
        if norm == 0 or weight == 0:
            raise InputError("an atom needs a nonzero weight and vector")
        weight = float(weight) * norm**3
        vector = vector / norm
        if weight < 0:
            weight, vector = -weight, -vector
        return cls(weight, vector)

    @property
    def n(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of weighted Dirac masses on the unit sphere."""

    atoms: Tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, Sequence[float]]], merge_tol: float = MERGE_TOL) -> "AtomicMeasure":
        """Normalize each pair and merge support points closer than ``merge_tol``."""
        merged: List[List] = []
        for weight, vector in pairs:
            atom = Atom.create(weight, vector)
            for entry in merged:
                if np.linalg.norm(entry[1] - atom.vector) <= merge_tol:
                    entry[0] += atom.weight
                    break
            else:
                merged.append([atom.weight, atom.vector])
        return cls(tuple(Atom(w, v) for w, v in merged))

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    def vectors(self, n: int = 0) -> np.ndarray:
        """Atom vectors as the columns of an n x r matrix."""
        if not self.atoms:
            return np.zeros((n, 0))
        return np.column_stack([a.vector for a in self.atoms])

    def sorted(self) -> "AtomicMeasure":
        """Atoms by decreasing weight."""
        return AtomicMeasure(tuple(sorted(self.atoms, key=lambda a: -a.weight)))
