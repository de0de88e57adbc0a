import numpy as np
import pytest

from conftest import random_orthonormal
from tensorcert.classes.certificate import CertificateStatus
from tensorcert.classes.errors import InputError
from tensorcert.classes.tensor import Atom, AtomicMeasure
from tensorcert.nodes.certifier import certify, dual_feasibility
from tensorcert.nodes.odeco import odeco_certificate, sphere_dual_triple
from tensorcert.utils.lowrank import min_eig
from tensorcert.utils.moments import monomials
from tensorcert.utils.tensor_core import hs_norm, rank_one_full, unflatten


@pytest.mark.parametrize("n, r", [(2, 1), (3, 2), (4, 2), (4, 4)])
def test_dual_triple_is_feasible(n, r, rng):
    F = random_orthonormal(n, r, rng)
    U, W, Z = sphere_dual_triple(F, 0.3)
    feas = dual_feasibility(U, W, Z, 0.3)
    assert feas.residual == pytest.approx(0.0, abs=1e-10)
    assert feas.min_eig >= -1e-10


def test_dual_triple_polynomial_identity(rng):
    sigma = 0.7
    F = random_orthonormal(3, 2, rng)
    U, W, Z = sphere_dual_triple(F, sigma)
    for x in rng.standard_normal((5, 3)):
        v = monomials(x, 3, 2)[0]
        z = v @ Z @ v
        u = float(np.sum(U * rank_one_full(x).reshape(3, 9)))
        w = np.concatenate([[1.0], x]) @ W @ np.concatenate([[1.0], x])
        assert z + u - (1 - x @ x) * w == pytest.approx(sigma)
        assert u == pytest.approx(sigma * np.sum((F.T @ x) ** 3))


def test_dual_triple_vanishes_on_the_atoms(rng):
    F = random_orthonormal(3, 2, rng)
    _, _, Z = sphere_dual_triple(F, 1.0)
    for x in F.T:
        v = monomials(x, 3, 2)[0]
        assert v @ Z @ v == pytest.approx(0.0, abs=1e-10)


def test_dual_triple_needs_orthonormal_vectors():
    with pytest.raises(InputError, match="orthonormal"):
        sphere_dual_triple(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.1)


@pytest.mark.parametrize("seed", range(20))
def test_random_odeco_instances_certify(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 6))
    s = int(rng.integers(2, n + 1))
    r = int(rng.integers(1, s))
    lam = np.sort(5.0 + rng.uniform(0.0, 1.0, size=s))[::-1]
    F = random_orthonormal(n, s, rng)
    measure = AtomicMeasure(tuple(Atom(w, F[:, i]) for i, w in enumerate(lam)))
    sigma = 0.0 if seed % 2 == 0 else 0.5 * (lam[r - 1] - lam[r])

    cert = odeco_certificate(measure, r, sigma)
    sol = cert.solution()
    feas = dual_feasibility(sol.U, sol.W, sol.Z, sigma)
    assert feas.residual <= 1e-10
    assert feas.min_eig >= -1e-10

    gap_sq = hs_norm(cert.tensor - unflatten(cert.B)) ** 2
    best_sq = hs_norm(cert.tensor - cert.best) ** 2
    assert gap_sq == pytest.approx(best_sq + r * sigma ** 2, rel=1e-9)
    assert best_sq == pytest.approx(np.sum(lam[r:] ** 2), rel=1e-9)

    certificate = certify(cert.tensor, r, sol)
    expected = CertificateStatus.BEST_RANK_R if sigma == 0 or r == 1 else CertificateStatus.QUASI_OPTIMAL
    assert certificate.status == expected


def test_solution_residuals_are_small(odeco_rank_two):
    sol = odeco_rank_two.solution()
    assert sol.residuals.primal_feas <= 1e-10
    assert sol.residuals.dual_feas <= 1e-10
    assert sol.residuals.psd_residual <= 1e-10
    assert min_eig(sol.Z) >= -1e-10


def test_sigma_outside_eigengap(odeco_atoms):
    with pytest.raises(InputError):
        odeco_certificate(odeco_atoms, 2, 2.0)
    with pytest.raises(InputError):
        odeco_certificate(odeco_atoms, 4, 0.0)
