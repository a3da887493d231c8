"""
Unit tests for initial data, the midpoint integrator and the energy bookkeeping
"""

import math

import numpy as np
import pytest

from src.core.assembly import assemble, build_mesh, interpolate
from src.core.coefficients import feller_weight, power_law_profile
from src.core.dynamics import (
    dissipation_residual, energy, initial_state, mesh_cauchy_rate, simulate, step, temporal_order
)
from src.core.errors import InvalidInitialDataError, StepError
from src.core.models import Mesh, SimulationSettings, State


def _matrices(alpha: float, n: int = 16, mu: float = 0.1, gamma_d: float = 0.25):
    profile = power_law_profile(alpha=alpha, mu=mu, beta_b=1.0, gamma_d=gamma_d)
    return assemble(profile, feller_weight(profile), build_mesh(n, profile))


def test_initial_presets(reference_matrices):
    mesh = reference_matrices.mesh
    state = initial_state("bump", mesh)
    assert state.y[0] == 0.0 and abs(state.y[-1]) < 1e-15
    assert np.all(state.v == 0.0)
    assert np.allclose(initial_state("ramp", mesh).y, mesh.nodes)
    assert np.all(initial_state("still", mesh, "still").y == 0.0)

    assert np.allclose(initial_state("bump", mesh, "ramp").v, mesh.nodes)

    with pytest.raises(InvalidInitialDataError):
        initial_state("wobble", mesh)
    with pytest.raises(InvalidInitialDataError):
        initial_state(np.ones(mesh.n + 1), mesh)
    with pytest.raises(InvalidInitialDataError):
        initial_state(np.zeros(mesh.n), mesh)


def test_ramp_on_uniform_mesh():
    """ramp, N = 4, q = 1 -> y = (0, .25, .5, .75, 1)"""
    mesh = Mesh.graded(4, 1.0)
    state = initial_state("ramp", mesh, "ramp")
    assert np.allclose(state.y, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(state.v, state.y)

    values = interpolate(mesh, lambda x: x)
    assert values is not mesh.nodes and values.flags.writeable
    values[0] = -1.0
    assert mesh.nodes[0] == 0.0


def test_energy_of_still_state_is_zero(reference_matrices):
    state = initial_state("still", reference_matrices.mesh)
    assert energy(state, reference_matrices, 0.1, 1.0) == 0.0


def test_energy_terms(drift_free_profile):
    """E(ramp, 0) = 1/2 (int eta + beta) for the drift-free profile"""
    matrices = assemble(drift_free_profile, feller_weight(drift_free_profile), build_mesh(16, drift_free_profile))
    state = initial_state("ramp", matrices.mesh)
    assert abs(energy(state, matrices, 0.0, 2.0) - 0.5 * (1.0 + 2.0)) < 1e-12


def test_dissipation_identity(reference_matrices, reference_hardy):
    """E_{n+1} - E_n = -dt v_mid,N^2 up to rounding"""
    lam = 0.05 / reference_hardy.c_hp
    state = initial_state("bump", reference_matrices.mesh)
    settings = SimulationSettings(dt=1e-3, t_final=1.0, stride=10)
    _, trace = simulate(reference_matrices, state, settings, lam, 1.0)
    assert trace.steps == 1000
    assert dissipation_residual(trace) <= 1e-10 * max(trace.e0, 1.0)
    assert trace.energy[-1] < trace.e0


@pytest.mark.parametrize("alpha", [0.5, 1.3])
@pytest.mark.parametrize("lam", [-0.5, 0.0, 0.3])
@pytest.mark.parametrize("beta", [0.0, 1.0, 5.0])
def test_energy_is_nonincreasing(alpha, lam, beta):
    """Weakly and strongly degenerate a, both signs of lambda, three feedback gains"""
    gamma_d = 0.25 if alpha < 1.0 else 0.2
    matrices = _matrices(alpha, gamma_d=gamma_d)
    state = initial_state("bump", matrices.mesh, "ramp")
    settings = SimulationSettings(dt=2e-3, t_final=0.5, stride=1)
    _, trace = simulate(matrices, state, settings, lam, beta)
    scale = abs(trace.e0)
    assert trace.max_energy_increase <= 1e-10 * scale, (
        f"energy grew by {trace.max_energy_increase} (E0 = {trace.e0})"
    )
    assert np.all(np.diff(trace.energy) <= 1e-10 * scale)


def test_undamped_energy_is_conserved(reference_matrices):
    state = initial_state("bump", reference_matrices.mesh)
    settings = SimulationSettings(dt=1e-3, t_final=1.0, stride=100, damped=False)
    _, trace = simulate(reference_matrices, state, settings, 0.0, 1.0)
    drift = np.max(np.abs(trace.energy - trace.e0))
    assert drift <= 1e-11 * trace.e0, f"undamped energy drifted by {drift}"


def test_explicit_euler_gains_energy(reference_matrices):
    """Forward Euler has no discrete dissipation identity"""
    state = initial_state("bump", reference_matrices.mesh)
    settings = SimulationSettings(dt=1e-3, t_final=0.2, stride=1, scheme="explicit_euler", damped=False)
    _, trace = simulate(reference_matrices, state, settings, 0.0, 0.0)
    assert trace.max_energy_increase > 0.0
    assert trace.energy[-1] > trace.e0


def test_uniform_time_grid(reference_matrices):
    state = initial_state("bump", reference_matrices.mesh)
    settings = SimulationSettings(dt=0.03, t_final=0.1, stride=2)
    _, trace = simulate(reference_matrices, state, settings, 0.0, 1.0)
    assert trace.steps == 4
    assert abs(trace.dt * trace.steps - 0.1) < 1e-15
    assert abs(trace.times[-1] - 0.1) < 1e-15
    assert len(trace.times) == 3


def test_stored_trajectory(reference_matrices):
    state = initial_state("pulse", reference_matrices.mesh)
    settings = SimulationSettings(dt=0.01, t_final=0.1, stride=1, store_trajectory=True)
    trajectory, trace = simulate(reference_matrices, state, settings, 0.0, 1.0)
    assert trajectory.y.shape == (11, reference_matrices.mesh.n + 1)
    assert np.all(trajectory.y[:, 0] == 0.0)
    assert np.allclose(trajectory.y[:, -1], trace.boundary_y)


def test_single_step_matches_simulate(reference_matrices):
    state = initial_state("bump", reference_matrices.mesh)
    one = step(state, 0.01, reference_matrices, 0.0, 1.0)
    _, trace = simulate(reference_matrices, state, SimulationSettings(dt=0.01, t_final=0.01), 0.0, 1.0)
    assert isinstance(one, State)
    assert abs(one.t - 0.01) < 1e-15
    assert abs(energy(one, reference_matrices, 0.0, 1.0) - trace.energy[-1]) < 1e-14
    with pytest.raises(StepError):
        step(state, 0.0, reference_matrices, 0.0, 1.0)


def test_tiny_step_barely_moves_the_state(reference_matrices):
    state = initial_state("pulse", reference_matrices.mesh)
    moved = step(state, 1e-12, reference_matrices, 0.0, 1.0)
    change = np.max(np.abs(moved.y - state.y)) + np.max(np.abs(moved.v - state.v))
    assert change <= 1e-10 * np.max(np.abs(state.y)), f"state changed by {change}"


def test_temporal_order_is_two(reference_matrices):
    """E(T) at dt, dt/2, dt/4 with compatible data, in the asymptotic range"""
    state = initial_state("pulse", reference_matrices.mesh)
    order, values = temporal_order(reference_matrices, state, 0.0, 1.0, t_final=1.0, dt=1e-3)
    assert 1.9 <= order <= 2.1, f"observed temporal order {order} from {values}"


def test_mesh_cauchy_rate_is_positive(reference_profile, reference_weights):
    rate, values = mesh_cauchy_rate(reference_profile, reference_weights, 16, "bump", t_final=0.5, dt=0.01)
    assert rate > 0.5, f"observed mesh rate {rate} from {values}"
    assert all(math.isfinite(v) for v in values)
