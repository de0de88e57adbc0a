import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensorcert.classes.errors import IllConditionedError, InputError
from tensorcert.classes.tensor import Atom, AtomicMeasure, SymTensor3, cubic_indices, cubic_multiplicities
from tensorcert.utils.tensor_core import (
    ascend,
    assemble,
    coherence,
    contract,
    cubic_form,
    entry_norm,
    flatten,
    hs_inner,
    hs_norm,
    rank_one_full,
    rotate,
    spectral_radius,
    tau,
    unflatten,
)

entries = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def plane_rotation(theta: float) -> np.ndarray:
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def test_storage_order_and_multiplicities():
    assert cubic_indices(2) == ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))
    assert cubic_multiplicities(3).tolist() == [1, 3, 3, 3, 6, 3, 1, 3, 3, 1]


def test_flatten_example1(example1):
    np.testing.assert_allclose(flatten(example1), [[2, 1, 1, 1], [1, 1, 1, 1]])


def test_unflatten_inverts_flatten(example3):
    np.testing.assert_allclose(unflatten(flatten(example3)).values, example3.values)


def test_unflatten_rejects_wrong_shape():
    with pytest.raises(InputError):
        unflatten(np.zeros((2, 3)))


def test_norms_example1(example1):
    assert hs_norm(example1) == pytest.approx(np.sqrt(11))
    assert entry_norm(example1) == pytest.approx(np.sqrt(7))
    assert hs_norm(example1) == pytest.approx(np.linalg.norm(flatten(example1)))


def test_from_entries_accepts_any_order_and_rejects_duplicates():
    A = SymTensor3.from_entries(2, {(1, 0, 0): 4.0})
    assert A.entries()[(0, 0, 1)] == 4.0
    with pytest.raises(InputError, match="duplicate"):
        SymTensor3.from_entries(3, {(0, 1, 2): 1.0, (2, 1, 0): 2.0})
    with pytest.raises(InputError):
        SymTensor3.from_entries(2, {(0, 0, 2): 1.0})


def test_from_full_rejects_asymmetric_array():
    T = np.zeros((2, 2, 2))
    T[0, 0, 1] = 1.0
    with pytest.raises(InputError, match="symmetric"):
        SymTensor3.from_full(T)


def test_wrong_number_of_values():
    with pytest.raises(InputError):
        SymTensor3(2, np.zeros(5))


def test_atom_create_normalizes_sign_and_scale():
    atom = Atom.create(-2.0, [0.0, 2.0])
    assert atom.weight == pytest.approx(16.0)
    np.testing.assert_allclose(atom.vector, [0.0, -1.0])


def test_rotate_by_minus_identity_negates(example3):
    np.testing.assert_allclose(rotate(-np.eye(3), example3).values, -example3.values)


def test_rotate_rejects_non_orthogonal(example1):
    with pytest.raises(InputError, match="orthogonal"):
        rotate(np.array([[1.0, 1.0], [0.0, 1.0]]), example1)


@given(st.lists(entries, min_size=4, max_size=4), st.floats(min_value=0, max_value=2 * np.pi))
@settings(max_examples=50, deadline=None)
def test_rotation_preserves_norm(values, theta):
    A = SymTensor3(2, values)
    assert hs_norm(rotate(plane_rotation(theta), A)) == pytest.approx(hs_norm(A), rel=1e-9, abs=1e-9)


@given(st.lists(entries, min_size=10, max_size=10),
       st.lists(st.floats(min_value=-1, max_value=1), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_inner_product_with_rank_one_is_cubic_form(values, x):
    x = np.asarray(x)
    A = SymTensor3(3, values)
    B = SymTensor3.from_full(rank_one_full(x))
    assert hs_inner(A, B) == pytest.approx(cubic_form(A.to_full(), x), rel=1e-9, abs=1e-9)


def test_assemble_matches_sum_of_rank_one_terms():
    atoms = AtomicMeasure.from_pairs([(2.0, [1.0, 0.0]), (1.0, [0.6, 0.8])])
    expected = 2.0 * rank_one_full(np.array([1.0, 0.0])) + rank_one_full(np.array([0.6, 0.8]))
    np.testing.assert_allclose(assemble(atoms, 2).to_full(), expected)


def test_spectral_radius_example1(example1):
    estimate = spectral_radius(example1)
    assert estimate.value == pytest.approx(3.2560, abs=1e-3)
    assert np.linalg.norm(estimate.vector) == pytest.approx(1.0)
    assert "lower bound" in estimate.provenance


def test_spectral_radius_of_rank_one():
    x = np.array([1.0, 2.0, 2.0]) / 3.0
    A = SymTensor3.from_full(5.0 * rank_one_full(x))
    assert spectral_radius(A, starts=10).value == pytest.approx(5.0, rel=1e-8)


def test_spectral_radius_zero_tensor():
    with pytest.raises(InputError, match="zero tensor"):
        spectral_radius(SymTensor3.zeros(2))


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, np.pi / 2])
def test_coherence_of_two_directions(theta):
    mu = coherence([np.array([1.0, 0.0]), np.array([np.cos(theta), np.sin(theta)])])
    assert mu == pytest.approx(abs(np.cos(theta)), abs=1e-12)


def test_coherence_needs_two_vectors():
    with pytest.raises(InputError):
        coherence([np.array([1.0, 0.0])])


def test_tau_two_atoms_at_sixty_degrees():
    atoms = AtomicMeasure.from_pairs([(1.0, [1.0, 0.0]), (1.0, [0.5, np.sqrt(3) / 2])])
    assert tau(atoms, 2) == pytest.approx(0.875)


def test_tau_rank_one_is_one():
    atoms = AtomicMeasure.from_pairs([(1.0, [1.0, 0.0]), (1.0, [0.0, 1.0])])
    assert tau(atoms, 1) == 1.0


def test_tau_orthonormal_atoms():
    atoms = AtomicMeasure.from_pairs([(1.0, [1.0, 0.0, 0.0]), (2.0, [0.0, 1.0, 0.0])])
    assert tau(atoms, 2) == pytest.approx(1.0)


def test_tau_ill_conditioned():
    atoms = AtomicMeasure.from_pairs([
        (1.0, [1.0, 0.0]), (1.0, [np.cos(0.1), np.sin(0.1)]), (1.0, [0.0, 1.0]),
    ])
    with pytest.raises(IllConditionedError):
        tau(atoms, 3)


def test_tau_with_fewer_atoms_than_rank_is_zero():
    atoms = AtomicMeasure.from_pairs([(1.0, [1.0, 0.0, 0.0]), (1.0, [0.5, np.sqrt(3) / 2, 0.0])])
    assert tau(atoms, 3) == 0.0
    assert tau(atoms, 2) == pytest.approx(0.875)


def test_tau_uses_the_heaviest_r_atoms():
    atoms = AtomicMeasure.from_pairs([
        (0.1, [np.cos(0.1), np.sin(0.1), 0.0]), (2.0, [1.0, 0.0, 0.0]), (1.0, [0.0, 1.0, 0.0]),
    ])
    assert tau(atoms, 2) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_ascend_raises_the_cubic_form_to_a_spectral_direction(seed):
    rng = np.random.default_rng(seed)
    T = SymTensor3(4, rng.standard_normal(20)).to_full()
    x0 = rng.standard_normal(4)
    x0 /= np.linalg.norm(x0)
    x = ascend(T, x0, tol=1e-10)
    f = cubic_form(T, x)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert f >= abs(cubic_form(T, x0)) - 1e-12
    assert np.linalg.norm(contract(T, x) - f * x) <= 1e-5 * max(1.0, abs(f))
