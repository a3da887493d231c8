"""
Unit tests for graded meshes, singular moments and the weighted matrices
"""

import numpy as np
import pytest
from scipy.integrate import quad

from src.core.assembly import (
    assemble, build_mesh, exact_power_mass, grading_strength, gradient_energy, interpolate,
    is_symmetric, potential_energy, refine, shifted_moments, singular_moment, weighted_l2_sq
)
from src.core.coefficients import feller_weight, power_law_profile
from src.core.errors import AssemblyError, IntegrabilityError
from src.core.models import Mesh


def test_grading_strength():
    assert grading_strength(0.0) == 1.0
    assert abs(grading_strength(0.5) - 4.0 / 3.0) < 1e-15
    assert grading_strength(1.0) == 2.0
    assert grading_strength(1.9) == 4.0


def test_build_mesh(reference_profile):
    mesh = build_mesh(16, reference_profile)
    assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 1.0
    assert np.all(np.diff(mesh.nodes) > 0.0)
    assert abs(mesh.q - 4.0 / 3.0) < 1e-15
    assert mesh.refined().n == 32
    assert np.allclose(mesh.refined().nodes[::2], mesh.nodes)
    with pytest.raises(AssemblyError):
        build_mesh(4, reference_profile)


def test_singular_moment():
    assert abs(singular_moment(0.0, 1.0, 0.5, 0) - 2.0) < 1e-15
    assert abs(singular_moment(0.25, 1.0, 0.0, 1) - (1.0 - 0.0625) / 2.0) < 1e-15
    with pytest.raises(IntegrabilityError):
        singular_moment(0.0, 1.0, 1.5, 0)


@pytest.mark.parametrize("x_l,h", [(0.5, 0.1), (0.1, 0.5), (0.0, 0.2)])
def test_shifted_moments_match_adaptive_quadrature(x_l, h):
    """Closed form, binomial and Gauss-Legendre branches agree with quad"""
    p = 0.75
    moments = shifted_moments(np.array([x_l]), np.array([h]), p, 3)[0]
    for j in range(4):
        expected, _ = quad(lambda x: (x - x_l) ** j * x ** -p, x_l, x_l + h, epsabs=1e-14, epsrel=1e-13)
        assert abs(moments[j] - expected) <= 1e-9 * abs(expected), f"J_{j} mismatch on ({x_l}, {h})"


def test_divergent_moments_are_nan():
    moments = shifted_moments(np.array([0.0]), np.array([0.1]), 1.5, 2)[0]
    assert np.isnan(moments[0])
    assert np.isfinite(moments[1]) and np.isfinite(moments[2])


def test_exact_and_gauss_paths_agree(drift_free_profile):
    weights = feller_weight(drift_free_profile)
    mesh = build_mesh(24, drift_free_profile)
    exact = assemble(drift_free_profile, weights, mesh, path="exact")
    gauss = assemble(drift_free_profile, weights, mesh, path="gauss")
    assert exact.quadrature == "exact" and gauss.quadrature == "gauss"
    for name in ("B", "K", "S"):
        a, b = getattr(exact, name), getattr(gauss, name)
        assert np.allclose(a.diag, b.diag, rtol=1e-10), f"{name} diagonal differs"
        assert np.allclose(a.off, b.off, rtol=1e-10), f"{name} off-diagonal differs"


def test_exact_path_needs_drift_free(reference_profile, reference_weights):
    mesh = build_mesh(16, reference_profile)
    with pytest.raises(AssemblyError):
        assemble(reference_profile, reference_weights, mesh, path="exact")


def test_forms_on_linear_function(drift_free_profile):
    """u = x is reproduced exactly by hats: int x^2 x^-p = 1 / (3 - p)"""
    weights = feller_weight(drift_free_profile)
    matrices = assemble(drift_free_profile, weights, build_mesh(16, drift_free_profile))
    u = interpolate(matrices.mesh, lambda x: x)
    assert abs(weighted_l2_sq(matrices, u) - 1.0 / 2.5) < 1e-12
    assert abs(gradient_energy(matrices, u) - 1.0) < 1e-12
    assert abs(potential_energy(matrices, u) - 1.0 / 2.25) < 1e-12


def test_forms_with_drift(reference_profile, reference_matrices, reference_weights):
    u = interpolate(reference_matrices.mesh, lambda x: x)
    eta = reference_weights.eta
    mass, _ = quad(lambda x: x ** 1.5 * eta(np.array(x)), 0.0, 1.0, epsabs=1e-14)
    stiff, _ = quad(lambda x: eta(np.array(x)), 0.0, 1.0, epsabs=1e-14)
    potential, _ = quad(lambda x: x ** 1.25 * eta(np.array(x)), 0.0, 1.0, epsabs=1e-14)
    assert abs(weighted_l2_sq(reference_matrices, u) - mass) < 1e-8 * mass
    assert abs(gradient_energy(reference_matrices, u) - stiff) < 1e-8 * stiff
    assert abs(potential_energy(reference_matrices, u) - potential) < 1e-8 * potential


def test_matrices_are_symmetric_positive(reference_matrices):
    for name in ("B", "K", "K0", "S"):
        matrix = getattr(reference_matrices, name)
        assert matrix.size == reference_matrices.mesh.n
        assert is_symmetric(matrix)
        assert np.all(matrix.diag > 0.0), f"{name} has a nonpositive diagonal"
    assert reference_matrices.boundary_index == reference_matrices.mesh.n - 1


def test_strongly_degenerate_assembly():
    """a = x, d = sqrt(x): the first-element moments of x^-1.5 diverge but are never used"""
    profile = power_law_profile(alpha=1.0, gamma_d=0.5)
    weights = feller_weight(profile)
    matrices = assemble(profile, weights, build_mesh(16, profile))
    assert matrices.p_potential == 1.5
    assert np.all(np.isfinite(matrices.S.diag))


def test_refine_doubles_mesh(reference_matrices):
    finer = refine(reference_matrices)
    assert finer.mesh.n == 2 * reference_matrices.mesh.n
    assert finer.quadrature == reference_matrices.quadrature


def test_uniform_mesh_model():
    mesh = Mesh.graded(4, 1.0)
    assert np.allclose(mesh.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(mesh.h, 0.25)
    assert np.allclose(exact_power_mass(mesh, 0.0).diag, [0.25 * 2 / 3] * 3 + [0.25 / 3])
