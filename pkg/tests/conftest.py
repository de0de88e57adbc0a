import numpy as np
import pytest

from tensorcert.classes.tensor import Atom, AtomicMeasure, SymTensor3
from tensorcert.nodes.odeco import odeco_certificate
from tensorcert.services.example_suite import example_tensor, load_golden
from tensorcert.utils.tensor_core import contract, hs_norm


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def golden():
    return load_golden()


@pytest.fixture
def example1() -> SymTensor3:
    return example_tensor("example1.json")


@pytest.fixture
def example3() -> SymTensor3:
    return example_tensor("example3.json")


@pytest.fixture
def example4() -> SymTensor3:
    return example_tensor("example4.json")


@pytest.fixture
def example5() -> SymTensor3:
    return example_tensor("example5.json")


@pytest.fixture
def example6() -> SymTensor3:
    return example_tensor("example6.json")


def random_orthonormal(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q[:, :r]


def odeco_measure(weights, rng: np.random.Generator) -> AtomicMeasure:
    """Atoms with the given weights on random orthonormal directions in R^len(weights)."""
    F = random_orthonormal(len(weights), len(weights), rng)
    return AtomicMeasure(tuple(Atom(w, F[:, i]) for i, w in enumerate(weights)))


def closed_form_residual(A: SymTensor3, vectors) -> float:
    """√(‖A‖² - uᵀC⁻¹u) for the plain least-squares coefficients."""
    F = np.column_stack(vectors)
    C = (F.T @ F) ** 3
    T = A.to_full()
    u = np.array([float(x @ contract(T, x)) for x in F.T])
    return float(np.sqrt(max(hs_norm(A) ** 2 - u @ np.linalg.solve(C, u), 0.0)))


def spectral_direction_residual(A: SymTensor3, x: np.ndarray) -> float:
    """‖A·x² - f x‖, zero exactly at a spectral direction."""
    g = contract(A.to_full(), x)
    return float(np.linalg.norm(g - (x @ g) * x))


@pytest.fixture
def odeco_atoms(rng) -> AtomicMeasure:
    return odeco_measure([3.0, 2.0, 0.5], rng)


@pytest.fixture
def odeco_rank_two(odeco_atoms):
    return odeco_certificate(odeco_atoms, 2, 0.1)
