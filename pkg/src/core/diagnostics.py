"""
Numerical checks of the multiplier identities and intermediate estimates
Post-processes stored trajectories of power-law runs; y_x inside space-time
integrals is the elementwise constant derivative, y_x(t, 1) comes from the
damping boundary condition eta(1) y_x(t, 1) = -(y_t(t, 1) + beta y(t, 1))
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.config import Config
from src.core.assembly import (
    assemble, assemble_weighted_load, assemble_weighted_mass, assemble_weighted_stiffness, build_mesh
)
from src.core.coefficients import feller_weight
from src.core.dynamics import initial_state, simulate
from src.core.errors import InsufficientHorizonError, UnsupportedProfileError
from src.core.models import (
    CoefficientProfile, DecayCertificate, EnergyTrace, HardyConstants, IdentityReport,
    LambdaGauge, SimulationSettings, TraceBoundCheck, Trajectory
)
from src.core.utils import relative_residual, time_integral

logger = logging.getLogger(__name__)

BOUNDARY_INTERVAL_NOTE = "all boundary integrals over (s, T), including the lambda y^2(t, 1) term"


def _window(times: np.ndarray, s: float, t_end: float) -> slice:
    if not t_end > s:
        raise ValueError(f"need T > s, got s = {s!r}, T = {t_end!r}")
    if times[-1] < t_end - 1e-12 * max(1.0, t_end):
        raise InsufficientHorizonError(f"trace ends at {times[-1]!r} < T = {t_end!r}", t_end)
    start = int(np.argmin(np.abs(times - s)))
    stop = int(np.argmin(np.abs(times - t_end)))
    return slice(start, stop + 1)


class IdentityEvaluator:
    """Discrete terms of the multiplier identities on a stored trajectory"""

    def __init__(self, trajectory: Trajectory, profile: CoefficientProfile):
        if not profile.is_power_law:
            raise UnsupportedProfileError("identity diagnostics need a power-law profile")
        if trajectory.stride != 1:
            raise UnsupportedProfileError(f"identity diagnostics need stride 1, got {trajectory.stride}")

        self.trajectory = trajectory
        self.profile = profile
        self.matrices = trajectory.matrices
        self.mesh = self.matrices.mesh
        self.weights = self.matrices.weights
        self.lam = trajectory.lam
        self.beta = trajectory.beta_damp
        self.alpha = profile.alpha
        self.gamma = profile.gamma_d
        self.eta1 = self.weights.eta_at_1
        self.sigma1 = self.weights.sigma_at_1
        self.d1 = float(profile.d(np.array([1.0]))[0])

    def _slice(self, s: float, t_end: float):
        window = _window(self.trajectory.times, s, t_end)
        times = self.trajectory.times[window]
        y = self.trajectory.y[window]
        v = self.trajectory.v[window]
        return times, y, v

    def _drift(self, x: np.ndarray) -> np.ndarray:
        """x b / a"""
        return self.profile.x_b_over_a(x)

    def _mass_form(self, p: float, factor, rows: np.ndarray) -> np.ndarray:
        eta = self.weights.eta
        matrix = assemble_weighted_mass(self.mesh, p, lambda x: factor(x) * eta(x), label="diagnostic mass")
        return matrix.quad_rows(rows[:, 1:])

    def _stiffness_form(self, factor, rows: np.ndarray) -> np.ndarray:
        eta = self.weights.eta
        matrix = assemble_weighted_stiffness(self.mesh, lambda x: factor(x) * eta(x), label="diagnostic stiffness")
        return matrix.quad_rows(rows[:, 1:])

    def _momentum(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        """int x y_x y_t / sigma at every sample"""
        left, right = assemble_weighted_load(self.mesh, self.alpha - 1.0, self.weights.eta)
        slopes = np.diff(y, axis=1) / self.mesh.h[None, :]
        return np.sum(slopes * (v[:, :-1] * left[None, :] + v[:, 1:] * right[None, :]), axis=1)

    def _boundary_flux(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        """y_x(t, 1) from the damping boundary condition"""
        return -(v[:, -1] + self.beta * y[:, -1]) / self.eta1

    def multiplier(self, s: float, t_end: float) -> IdentityReport:
        times, y, v = self._slice(s, t_end)
        alpha, gamma, lam = self.alpha, self.gamma, self.lam
        flux = self._boundary_flux(y, v)
        momentum = self._momentum(y, v)

        terms = {
            "time_boundary": 2.0 * (momentum[-1] - momentum[0]),
            "velocity_trace": -time_integral(v[:, -1] ** 2, times) / self.sigma1,
            "flux_trace": -self.eta1 * time_integral(flux ** 2, times),
            "potential_trace": -lam / (self.sigma1 * self.d1) * time_integral(y[:, -1] ** 2, times),
            "drift": -time_integral(self._stiffness_form(self._drift, y), times),
            "kinetic": time_integral(self._mass_form(alpha, lambda x: 1.0 - alpha + self._drift(x), v), times),
            "gradient": time_integral(self.matrices.K.quad_rows(y[:, 1:]), times),
            "potential": 0.0,
        }
        if lam != 0.0:
            terms["potential"] = time_integral(
                self._mass_form(alpha + gamma, lambda x: lam * (1.0 - alpha - gamma + self._drift(x)), y), times
            )

        lhs = terms["drift"] + terms["kinetic"] + terms["gradient"] + terms["potential"]
        rhs = -(terms["time_boundary"] + terms["velocity_trace"] + terms["flux_trace"] + terms["potential_trace"])
        return IdentityReport(
            identity_name="multiplier",
            lhs=lhs, rhs=rhs, residual=relative_residual(lhs, rhs),
            terms=terms, notes=[BOUNDARY_INTERVAL_NOTE],
        )

    def boundary_terms(self, s: float, t_end: float) -> IdentityReport:
        times, y, v = self._slice(s, t_end)
        alpha, gamma, lam = self.alpha, self.gamma, self.lam
        half_k = alpha / 2.0
        flux = self._boundary_flux(y, v)
        momentum = self._momentum(y, v)
        pairing = self.matrices.B.bilinear_rows(y[:, 1:], v[:, 1:])
        at_time = -2.0 * momentum + half_k * pairing

        terms = {
            "time_boundary": float(at_time[-1] - at_time[0]),
            "velocity_trace": time_integral(v[:, -1] ** 2, times) / self.sigma1,
            "flux_trace": self.eta1 * time_integral(flux ** 2, times),
            "flux_displacement_trace": -half_k * self.eta1 * time_integral(flux * y[:, -1], times),
            "potential_trace": lam / (self.sigma1 * self.d1) * time_integral(y[:, -1] ** 2, times),
            "kinetic": time_integral(
                self._mass_form(alpha, lambda x: 1.0 - alpha + self._drift(x) + half_k, v), times),
            "gradient": time_integral(
                self._stiffness_form(lambda x: 1.0 - self._drift(x) - half_k, y), times),
            "potential": 0.0,
        }
        if lam != 0.0:
            terms["potential"] = time_integral(
                self._mass_form(alpha + gamma,
                                lambda x: lam * (1.0 - alpha + self._drift(x) - gamma + half_k), y), times
            )

        lhs = (terms["time_boundary"] + terms["velocity_trace"] + terms["flux_trace"]
               + terms["flux_displacement_trace"] + terms["potential_trace"])
        rhs = terms["kinetic"] + terms["gradient"] + terms["potential"]
        return IdentityReport(
            identity_name="boundary_terms",
            lhs=lhs, rhs=rhs, residual=relative_residual(lhs, rhs),
            terms=terms, notes=[BOUNDARY_INTERVAL_NOTE],
        )


def multiplier_residual(trajectory: Trajectory, profile: CoefficientProfile,
                        s: float = Config.DIAGNOSTIC_S, t_end: float = Config.DIAGNOSTIC_T) -> IdentityReport:
    """Identity from the x y_x / sigma multiplier"""
    report = IdentityEvaluator(trajectory, profile).multiplier(s, t_end)
    logger.info(f"Multiplier identity: lhs = {report.lhs:.10g}, rhs = {report.rhs:.10g}, "
                f"residual = {report.residual:.3e}")
    return report


def bt_identity_residual(trajectory: Trajectory, profile: CoefficientProfile,
                         s: float = Config.DIAGNOSTIC_S, t_end: float = Config.DIAGNOSTIC_T) -> IdentityReport:
    """(B.T.) = distributed terms, from the x y_x / sigma and y / sigma multipliers"""
    report = IdentityEvaluator(trajectory, profile).boundary_terms(s, t_end)
    logger.info(f"Boundary-term identity: lhs = {report.lhs:.10g}, rhs = {report.rhs:.10g}, "
                f"residual = {report.residual:.3e}")
    return report


def trace_bound_check(trace: EnergyTrace,
                      cert: DecayCertificate,
                      gauge: LambdaGauge,
                      hardy: HardyConstants,
                      s: float,
                      t_end: float,
                      delta: Optional[float] = None,
                      constant_scale: float = 1.0) -> TraceBoundCheck:
    """Boundary-trace estimate and energy-integral estimate on [s, T]

    constant_scale divides every right-hand side (values above 1 force violations).
    """
    window = _window(trace.times, s, t_end)
    times = trace.times[window]
    energy = trace.energy[window]
    boundary_y = trace.boundary_y[window]
    delta = cert.delta if delta is None else delta

    one_eps, c_lam = gauge.one_eps, gauge.c_lambda
    c_tilde = hardy.certified_c_hp_tilde
    c3 = (2.0 / one_eps + 2.0 * c_tilde * c_lam ** 2 / (one_eps ** 2 * cert.eta_min ** 2)
          + (1.0 + (c_tilde + cert.eta_max) * c_lam ** 4) / (2.0 * delta))

    trace_sq = time_integral(boundary_y ** 2, times)
    energy_integral = time_integral(energy, times)
    e_s = float(energy[0])
    distributed = time_integral(2.0 * energy - trace.beta_damp * boundary_y ** 2, times)

    trace_lhs = trace_sq
    trace_rhs = (c3 * e_s + delta * cert.c4 * energy_integral) / constant_scale

    c2_boundary = cert.c2 - cert.beta_damp * cert.epsilon0 / 2.0
    energy_lhs = cert.epsilon0 / 2.0 * distributed
    energy_rhs = cert.c1 * e_s + c2_boundary * trace_sq
    if cert.lam < 0.0:
        energy_rhs -= 2.0 * cert.lam * cert.c_hp * (1.0 + 1.5 * cert.k_a + cert.k_d + cert.m) * energy_integral
    energy_rhs /= constant_scale

    slacks = {"trace_bound": trace_rhs - trace_lhs, "energy_bound": energy_rhs - energy_lhs}
    check = TraceBoundCheck(
        trace_bound_holds=slacks["trace_bound"] >= 0.0,
        energy_bound_holds=slacks["energy_bound"] >= 0.0,
        slacks=slacks,
        values={"trace_integral": trace_sq, "energy_integral": energy_integral, "energy_at_s": e_s,
                "distributed_integral": distributed, "c3": c3, "delta": delta},
    )
    logger.info(f"Trace bounds on [{s}, {t_end}]: slacks = {slacks}")
    return check


def identity_refinement_study(profile: CoefficientProfile,
                              levels: Sequence[Tuple[int, float]],
                              s: float = Config.DIAGNOSTIC_S,
                              t_end: float = Config.DIAGNOSTIC_T,
                              displacement: str = "pulse",
                              q: Optional[float] = None) -> List[IdentityReport]:
    """Both identities on each (N, dt) level; the last reports carry the residual trend"""
    weights = feller_weight(profile)
    multiplier_reports, bt_reports, labels = [], [], []
    for n, dt in levels:
        mesh = build_mesh(n, profile, q)
        matrices = assemble(profile, weights, mesh)
        state = initial_state(displacement, mesh)
        settings = SimulationSettings(dt=dt, t_final=t_end, stride=1, store_trajectory=True)
        trajectory, _ = simulate(matrices, state, settings, profile.lam, profile.beta_damp)
        multiplier_reports.append(multiplier_residual(trajectory, profile, s, t_end))
        bt_reports.append(bt_identity_residual(trajectory, profile, s, t_end))
        labels.append(f"N={n},dt={dt:g}")

    results = []
    for reports in (multiplier_reports, bt_reports):
        trend = [r.residual for r in reports]
        results.append(reports[-1].model_copy(update={"refinement_trend": trend, "levels": labels}))
    return results
