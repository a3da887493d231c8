"""
Shared fixtures: the reference profile a = x^(1/2), b = 0.1 x, d = x^(1/4)
on small meshes
"""

import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.assembly import assemble, build_mesh
from src.core.coefficients import feller_weight, power_law_profile
from src.core.spectral import best_constants

TEST_DATA = project_root / "test_data"


@pytest.fixture(scope="session")
def test_data_dir() -> Path:
    return TEST_DATA


@pytest.fixture(scope="session")
def reference_profile():
    return power_law_profile(alpha=0.5, mu=0.1, beta_b=1.0, gamma_d=0.25, lam=0.0, beta_damp=1.0)


@pytest.fixture(scope="session")
def drift_free_profile():
    return power_law_profile(alpha=0.5, mu=0.0, gamma_d=0.25, lam=0.0, beta_damp=1.0)


@pytest.fixture(scope="session")
def reference_weights(reference_profile):
    return feller_weight(reference_profile)


@pytest.fixture(scope="session")
def reference_matrices(reference_profile, reference_weights):
    mesh = build_mesh(32, reference_profile)
    return assemble(reference_profile, reference_weights, mesh)


@pytest.fixture(scope="session")
def reference_hardy(reference_matrices):
    return best_constants(reference_matrices, refine_levels=3)
