import asyncio

import numpy as np
import pytest

from conftest import closed_form_residual
from tensorcert.classes.errors import InputError, RefinementUnavailable
from tensorcert.classes.tensor import Atom, AtomicMeasure
from tensorcert.nodes.odeco import odeco_certificate
from tensorcert.nodes.refiner import Refiner, rank_one_refine, refine_coefficients
from tensorcert.utils.tensor_core import assemble, cubic_form, hs_norm

VECTORS = [np.array([1.0, 0.0, 0.0]), np.array([0.6, 0.8, 0.0]), np.array([0.0, 0.6, 0.8])]


def test_refine_coefficients_recovers_exact_weights():
    atoms = AtomicMeasure.from_pairs(zip([2.0, 1.0, 0.5], VECTORS))
    A = assemble(atoms, 3)
    result = refine_coefficients(A, VECTORS)
    np.testing.assert_allclose(result.weights, [2.0, 1.0, 0.5], atol=1e-10)
    assert result.residual == pytest.approx(0.0, abs=1e-10)
    assert not result.nonpositive
    assert len(result.measure()) == 3


def test_closed_form_residual_matches_least_squares(example3):
    vectors = VECTORS[:2]
    assert closed_form_residual(example3, vectors) == pytest.approx(
        refine_coefficients(example3, vectors).residual, abs=1e-8)


def test_sigma_shifts_the_right_hand_side():
    A = assemble(AtomicMeasure.from_pairs([(2.0, VECTORS[0])]), 3)
    result = refine_coefficients(A, VECTORS[:1], sigma=0.25)
    assert result.weights[0] == pytest.approx(1.75)


def test_repeated_vectors_are_unavailable(example3):
    with pytest.raises(RefinementUnavailable):
        refine_coefficients(example3, [VECTORS[0], VECTORS[0]])


def test_refinement_needs_unit_vectors(example3):
    with pytest.raises(InputError):
        refine_coefficients(example3, [np.array([2.0, 0.0, 0.0])])
    with pytest.raises(InputError):
        refine_coefficients(example3, [np.array([1.0, 0.0])])


def test_rank_one_refine_adds_sigma(odeco_atoms):
    cert = odeco_certificate(odeco_atoms, 1, 1e-3)
    refinement = rank_one_refine(cert.tensor, cert.solution())
    top = odeco_atoms.sorted().atoms[0]
    assert refinement.refined
    assert refinement.weight == pytest.approx(top.weight)
    assert abs(refinement.vector @ top.vector) == pytest.approx(1.0)
    assert cubic_form(cert.tensor.to_full(), refinement.vector) > 0
    assert refinement.residual == pytest.approx(hs_norm(cert.tensor - cert.best), abs=1e-8)


def test_rank_one_refine_keeps_weight_above_threshold(odeco_atoms):
    cert = odeco_certificate(odeco_atoms, 1, 1e-3)
    sol = cert.solution()
    refinement = rank_one_refine(cert.tensor, sol, rho_hat=1e-4)
    assert not refinement.refined
    assert refinement.weight == pytest.approx(sol.X[0, 0])
    assert "not below" in refinement.note


def test_refiner_node_coefficients(odeco_rank_two, odeco_atoms):
    kept = AtomicMeasure(odeco_atoms.sorted().atoms[:2])
    state = {"tensor": odeco_rank_two.tensor, "rank": 2, "solution": odeco_rank_two.solution(),
             "atoms": kept, "messages": []}
    state = asyncio.run(Refiner().run(state))
    refinement = state["refinement"]
    assert refinement["kind"] == "coefficients"
    assert sorted(refinement["weights"]) == pytest.approx([2.0, 3.0])
    assert refinement["residual"] == pytest.approx(0.5, abs=1e-8)
    assert "Refiner" in state["messages"][-1].content


def test_refiner_node_unavailable(example3):
    sol = odeco_certificate(AtomicMeasure.from_pairs([(1.0, VECTORS[0])]), 1, 0.0).solution()
    twins = AtomicMeasure((Atom(1.0, VECTORS[0]), Atom(1.0, VECTORS[0])))
    state = {"tensor": example3, "rank": 2, "solution": sol, "atoms": twins, "messages": []}
    state = asyncio.run(Refiner().run(state))
    assert state["refinement"]["kind"] == "unavailable"
    assert "singular" in state["refinement"]["reason"]
