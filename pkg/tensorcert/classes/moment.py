from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import InputError


def moment_length(n: int, degree: int) -> int:
    """Number of monomials in n variables of degree at most ``degree``."""
    return comb(n + degree, degree)


@dataclass(frozen=True)
class MomentSequence:
    """Truncated moment vector of degree 2k, graded-lex ordered."""

    n: int
    k: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise InputError(f"invalid moment sequence shape n={self.n}, k={self.k}")
        values = np.array(self.values, dtype=float).ravel()
        expected = moment_length(self.n, 2 * self.k)
        if values.shape[0] != expected:
            raise InputError(
                f"moment vector for n={self.n}, k={self.k} needs {expected} entries, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("moment vector must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n: int, k: int) -> "MomentSequence":
        return cls(n, k, np.zeros(moment_length(n, 2 * k)))

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def __len__(self) -> int:
        return self.values.shape[0]
