import numpy as np
import pytest

from conftest import spectral_direction_residual
from tensorcert.classes.errors import InputError
from tensorcert.classes.tensor import SymTensor3
from tensorcert.nodes.odeco import odeco_certificate
from tensorcert.oracle import baseline_rank_r, brute_rank_one, sphere_points
from tensorcert.utils.tensor_core import hs_norm


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_points_are_unit(n):
    points = sphere_points(n, 512, seed=1)
    assert points.shape == (512, n)
    np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0)


def test_brute_rank_one_example1(example1):
    result = brute_rank_one(example1)
    assert result.value == pytest.approx(3.2560, abs=1e-3)
    np.testing.assert_allclose(result.vector, [0.7981, 0.6025], atol=1e-3)
    assert result.method == "grid+polish"
    assert spectral_direction_residual(example1, result.vector) <= 1e-6


def test_brute_rank_one_example3(example3):
    result = brute_rank_one(example3, grid_density=20_000)
    assert result.value == pytest.approx(2.1110, abs=1e-3)
    np.testing.assert_allclose(result.vector, [0.5204, 0.5113, 0.6839], atol=1e-3)


def test_brute_rank_one_dimension_limit():
    with pytest.raises(InputError):
        brute_rank_one(SymTensor3.zeros(5))


def test_baseline_recovers_orthogonal_rank_two(odeco_atoms):
    cert = odeco_certificate(odeco_atoms, 2, 0.0)
    result = baseline_rank_r(cert.tensor, 2, starts=5, seed=3)
    assert result.method == "multistart-als"
    assert result.residual == pytest.approx(hs_norm(cert.tensor - cert.best), abs=1e-6)
    assert sorted(result.atoms.weights) == pytest.approx([2.0, 3.0], abs=1e-5)


def test_baseline_is_an_upper_bound_for_rank_one(example1):
    result = baseline_rank_r(example1, 1, starts=3)
    best = brute_rank_one(example1).value
    assert result.residual >= np.sqrt(max(hs_norm(example1) ** 2 - best ** 2, 0.0)) - 1e-8


def test_baseline_rejects_rank_zero(example1):
    with pytest.raises(InputError):
        baseline_rank_r(example1, 0)
