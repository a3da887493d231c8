"""
Time integration of the boundary-damped wave system
Implicit midpoint on  y' = v,  B v' = -(K - lambda S) y - beta y_N e_N - v_N e_N,
reduced to one symmetric banded solve per step
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from config.config import Config
from src.core.assembly import assemble, build_mesh, interpolate
from src.core.errors import InvalidInitialDataError, StepError
from src.core.models import (
    CoefficientProfile, EnergyTrace, Mesh, OperatorMatrices, SimulationSettings,
    State, SymTridiagonal, Trajectory, WeightPair
)
from src.core.utils import observed_order

logger = logging.getLogger(__name__)


PRESETS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "ramp": lambda x: x,
    "bump": lambda x: 4.0 * x * (1.0 - x),
    "pulse": lambda x: 16.0 * x ** 2 * (1.0 - x) ** 2,
    "still": lambda x: np.zeros_like(x),
}

InitialData = Union[str, np.ndarray, None]


def _nodal(data: InitialData, mesh: Mesh, name: str) -> np.ndarray:
    if data is None:
        return np.zeros(mesh.n + 1)
    if isinstance(data, str):
        if data not in PRESETS:
            raise InvalidInitialDataError(f"unknown {name} preset {data!r}; choose from {sorted(PRESETS)}")
        values = interpolate(mesh, PRESETS[data])
        values[0] = 0.0
        return values
    values = np.asarray(data, dtype=float)
    if values.shape != (mesh.n + 1,):
        raise InvalidInitialDataError(f"{name} needs {mesh.n + 1} nodal values, got shape {values.shape}")
    if values[0] != 0.0:
        raise InvalidInitialDataError(f"{name}(0) = 0 violated: {name}(0) = {values[0]!r}")
    if not np.all(np.isfinite(values)):
        raise InvalidInitialDataError(f"{name} has non-finite entries")
    return values


def initial_state(displacement: InitialData, mesh: Mesh, velocity: InitialData = None) -> State:
    """Nodal initial data from presets (ramp, bump, pulse, still) or custom vectors"""
    return State(y=_nodal(displacement, mesh, "y"), v=_nodal(velocity, mesh, "v"), t=0.0)


def _energy(matrices: OperatorMatrices, a_lam: SymTridiagonal, y: np.ndarray, v: np.ndarray,
            beta_damp: float) -> float:
    return 0.5 * (matrices.B.quad(v) + a_lam.quad(y) + beta_damp * y[-1] ** 2)


def energy(state: State, matrices: OperatorMatrices, lam: float, beta_damp: float) -> float:
    """E = 1/2 (v'Bv + y'Ky - lambda y'Sy + beta y_N^2)"""
    return _energy(matrices, matrices.operator(lam), state.y[1:], state.v[1:], beta_damp)


class MidpointStepper:
    """Implicit midpoint for the reduced system; factors the step matrix once

    With D = y1 - y0 the scheme reads
        (2/dt B + dt/2 A + (c + beta dt/2) e_N e_N^T) D = 2 B v0 - dt A y0 - dt beta y0_N e_N
    where A = K - lambda S and c = 1 when the boundary damping is active.
    Then v1 = 2 D / dt - v0 and the boundary midpoint velocity is D_N / dt.
    """

    def __init__(self, matrices: OperatorMatrices, lam: float, beta_damp: float, dt: float,
                 damped: bool = True):
        self.matrices = matrices
        self.lam = lam
        self.beta_damp = beta_damp
        self.dt = dt
        self.damped = damped
        self.a_lam = matrices.operator(lam)

        corner = (1.0 if damped else 0.0) + beta_damp * dt / 2.0
        system = matrices.B.scaled(2.0 / dt).plus(self.a_lam.scaled(dt / 2.0)).with_corner(corner)
        try:
            self._factor = cholesky_banded(system.to_banded())
        except LinAlgError as exc:
            ratio = float(np.max(np.abs(system.diag)) / np.min(np.abs(system.diag)))
            raise StepError(f"midpoint step matrix is not positive definite "
                            f"(diagonal condition estimate {ratio:.3e}, dt = {dt!r})") from exc

    def advance(self, y: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """One step on free nodal vectors; returns (y1, v1, boundary midpoint velocity)"""
        dt = self.dt
        rhs = 2.0 * self.matrices.B.matvec(v) - dt * self.a_lam.matvec(y)
        rhs[-1] -= dt * self.beta_damp * y[-1]
        delta = cho_solve_banded((self._factor, False), rhs)
        if not np.all(np.isfinite(delta)):
            raise StepError("midpoint solve produced non-finite values")
        return y + delta, 2.0 * delta / dt - v, delta[-1] / dt


class ExplicitEulerStepper:
    """Forward Euler on the same system; reference scheme without the discrete identity"""

    def __init__(self, matrices: OperatorMatrices, lam: float, beta_damp: float, dt: float,
                 damped: bool = True):
        self.matrices = matrices
        self.beta_damp = beta_damp
        self.dt = dt
        self.damped = damped
        self.a_lam = matrices.operator(lam)
        try:
            self._factor = cholesky_banded(matrices.B.to_banded())
        except LinAlgError as exc:
            raise StepError("mass matrix B is not positive definite") from exc

    def advance(self, y: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        force = self.a_lam.matvec(y)
        force[-1] += self.beta_damp * y[-1] + (v[-1] if self.damped else 0.0)
        v1 = v - self.dt * cho_solve_banded((self._factor, False), force)
        return y + self.dt * v, v1, 0.5 * (v[-1] + v1[-1])


def make_stepper(matrices: OperatorMatrices, lam: float, beta_damp: float, dt: float,
                 scheme: str = "midpoint", damped: bool = True):
    if scheme == "midpoint":
        return MidpointStepper(matrices, lam, beta_damp, dt, damped)
    if scheme == "explicit_euler":
        return ExplicitEulerStepper(matrices, lam, beta_damp, dt, damped)
    raise ValueError(f"unknown scheme {scheme!r}")


def step(state: State, dt: float, matrices: OperatorMatrices, lam: float, beta_damp: float) -> State:
    """One implicit midpoint step"""
    if dt <= 0.0:
        raise StepError(f"dt > 0 violated: dt = {dt!r}")
    stepper = MidpointStepper(matrices, lam, beta_damp, dt)
    y1, v1, _ = stepper.advance(state.y[1:], state.v[1:])
    return State(y=np.concatenate([[0.0], y1]), v=np.concatenate([[0.0], v1]), t=state.t + dt)


def simulate(matrices: OperatorMatrices,
             state: State,
             settings: SimulationSettings,
             lam: float,
             beta_damp: float) -> Tuple[Optional[Trajectory], EnergyTrace]:
    """Integrate to settings.t_final on a uniform grid dt = t_final / steps

    Every step contributes |E_{n+1} - E_n + dt v_mid,N^2| / max(E_0, 1) to the
    residual of the next recorded sample; the dissipation term is dropped for
    undamped runs.
    """
    steps = int(math.ceil(settings.t_final / settings.dt - 1e-9)) if settings.t_final > 0.0 else 0
    dt = settings.t_final / steps if steps else settings.dt
    stride = settings.stride
    stepper = make_stepper(matrices, lam, beta_damp, dt, settings.scheme, settings.damped)
    dissipation = 1.0 if settings.damped else 0.0

    y, v = np.array(state.y[1:]), np.array(state.v[1:])
    e_prev = _energy(matrices, stepper.a_lam, y, v, beta_damp)
    e0 = e_prev
    scale = max(e0, 1.0)

    times: List[float] = [state.t]
    energies: List[float] = [e0]
    boundary_y: List[float] = [y[-1]]
    boundary_v: List[float] = [v[-1]]
    residuals: List[float] = [0.0]
    ys: List[np.ndarray] = [np.array(state.y)] if settings.store_trajectory else []
    vs: List[np.ndarray] = [np.array(state.v)] if settings.store_trajectory else []

    logger.info(f"Simulating N = {matrices.mesh.n}, dt = {dt:.3g}, steps = {steps}, "
                f"scheme = {settings.scheme}, damped = {settings.damped}")

    window_residual = 0.0
    max_increase = -math.inf
    for n in range(1, steps + 1):
        y, v, v_mid = stepper.advance(y, v)
        e_next = _energy(matrices, stepper.a_lam, y, v, beta_damp)
        window_residual = max(window_residual,
                              abs(e_next - e_prev + dissipation * dt * v_mid ** 2) / scale)
        max_increase = max(max_increase, e_next - e_prev)
        e_prev = e_next

        if n % stride == 0 or n == steps:
            # last sample lands exactly on t_final
            times.append(state.t + (settings.t_final if n == steps else n * dt))
            energies.append(e_next)
            boundary_y.append(y[-1])
            boundary_v.append(v[-1])
            residuals.append(window_residual)
            window_residual = 0.0
            if settings.store_trajectory:
                ys.append(np.concatenate([[0.0], y]))
                vs.append(np.concatenate([[0.0], v]))

    trace = EnergyTrace(
        times=np.array(times), energy=np.array(energies),
        boundary_y=np.array(boundary_y), boundary_v=np.array(boundary_v),
        dissipation_residuals=np.array(residuals),
        dt=dt, stride=stride, e0=e0, steps=steps,
        max_energy_increase=max_increase if steps else 0.0,
        lam=lam, beta_damp=beta_damp,
    )
    logger.info(f"Simulation done: E(0) = {e0:.6g}, E(T) = {energies[-1]:.6g}, "
                f"max residual = {dissipation_residual(trace):.3e}")
    if trace.max_energy_increase > Config.MONOTONICITY_TOL * scale:
        logger.warning(f"Energy increased by {trace.max_energy_increase:.3e} in one step "
                       f"(scheme = {settings.scheme})")

    trajectory = None
    if settings.store_trajectory:
        trajectory = Trajectory(
            times=np.array(times), y=np.array(ys), v=np.array(vs),
            matrices=matrices, lam=lam, beta_damp=beta_damp, dt=dt, stride=stride,
        )
    return trajectory, trace


def dissipation_residual(trace: EnergyTrace) -> float:
    """max over steps of |E_{n+1} - E_n + dt v_mid,N^2| / max(E_0, 1)"""
    if trace.dissipation_residuals.size == 0:
        return 0.0
    return float(np.max(trace.dissipation_residuals))


def final_energy(matrices: OperatorMatrices, state: State, lam: float, beta_damp: float,
                 t_final: float, dt: float) -> float:
    settings = SimulationSettings(dt=dt, t_final=t_final, stride=max(1, int(round(t_final / dt))))
    _, trace = simulate(matrices, state, settings, lam, beta_damp)
    return float(trace.energy[-1])


def temporal_order(matrices: OperatorMatrices, state: State, lam: float, beta_damp: float,
                   t_final: float, dt: float) -> Tuple[float, List[float]]:
    """Observed order of E(T) at dt, dt/2, dt/4"""
    values = [final_energy(matrices, state, lam, beta_damp, t_final, dt / 2 ** k) for k in range(3)]
    order = observed_order(*values)
    logger.info(f"Observed temporal order {order:.3f} from E(T) = {values}")
    return order, values


def mesh_cauchy_rate(profile: CoefficientProfile, weights: WeightPair, n: int,
                     displacement: InitialData, t_final: float, dt: float,
                     q: Optional[float] = None) -> Tuple[float, List[float]]:
    """Observed rate of E(T) under N, 2N, 4N with the same initial preset"""
    values = []
    mesh = build_mesh(n, profile, q)
    for _ in range(3):
        matrices = assemble(profile, weights, mesh)
        state = initial_state(displacement, mesh)
        values.append(final_energy(matrices, state, profile.lam, profile.beta_damp, t_final, dt))
        mesh = mesh.refined()
    rate = observed_order(*values)
    logger.info(f"Mesh Cauchy rate {rate:.3f} from E(T) = {values}")
    return rate, values
