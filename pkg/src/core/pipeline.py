"""
Laboratory pipeline
Orchestrates weights, assembly, Hardy constants, hypotheses, certificate,
simulation and diagnostics for one coefficient profile
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.config import Config
from src.core.assembly import assemble, build_mesh
from src.core.certificate import compute_certificate, fit_decay_rate, verify_decay_bound
from src.core.coefficients import check_hypotheses, feller_weight, power_law_profile
from src.core.diagnostics import bt_identity_residual, multiplier_residual
from src.core.dynamics import InitialData, initial_state, simulate
from src.core.errors import DegWaveError, FitError, HypothesisError, InvalidCoefficientError
from src.core.models import (
    BoundVerdict, CoefficientProfile, DecayCertificate, DecayFit, DegeneracyReport, EnergyTrace,
    HardyConstants, IdentityReport, LambdaGauge, OperatorMatrices, SimulationSettings, Trajectory
)
from src.core.spectral import best_constants, hardy_quotients, lambda_gauge

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("lambda", "beta_damp", "alpha", "mu", "gamma_d")


class Laboratory:
    """Runs every stage of the decay study for one profile; stages are computed lazily"""

    def __init__(self,
                 profile: CoefficientProfile,
                 n: int = Config.DEFAULT_ELEMENTS,
                 q: Optional[float] = None,
                 refine_levels: int = Config.DEFAULT_REFINE_LEVELS,
                 path: str = "auto",
                 points: int = Config.GAUSS_POINTS):
        self.profile = profile
        self.n = n
        self.q = q
        self.refine_levels = refine_levels
        self.path = path
        self.points = points
        self.processing_notes: List[str] = []

        self._matrices: Optional[OperatorMatrices] = None
        self._hardy: Optional[HardyConstants] = None
        self._report: Optional[DegeneracyReport] = None

    @property
    def matrices(self) -> OperatorMatrices:
        if self._matrices is None:
            weights = feller_weight(self.profile)
            mesh = build_mesh(self.n, self.profile, self.q)
            self._matrices = assemble(self.profile, weights, mesh, self.path, self.points)
        return self._matrices

    @property
    def hardy(self) -> HardyConstants:
        if self._hardy is None:
            self._hardy = best_constants(self.matrices, self.refine_levels)
        return self._hardy

    @property
    def report(self) -> DegeneracyReport:
        if self._report is None:
            self._report = check_hypotheses(self.profile, self.hardy)
        return self._report

    def with_feedback(self, lam: float, beta_damp: float) -> "Laboratory":
        """Same coefficients with another lambda / beta; shares matrices and Hardy constants"""
        if not (math.isfinite(lam) and math.isfinite(beta_damp)):
            raise InvalidCoefficientError(f"lambda and beta_damp must be finite, got {lam!r}, {beta_damp!r}")
        if beta_damp < 0.0:
            raise InvalidCoefficientError(f"beta_damp >= 0 violated: lhs = {beta_damp!r}, rhs = 0")
        profile = self.profile.model_copy(update={"lam": lam, "beta_damp": beta_damp})
        twin = Laboratory(profile, self.n, self.q, self.refine_levels, self.path, self.points)
        matrices = self.matrices
        twin._matrices = matrices.model_copy(update={"profile": profile})
        twin._hardy = self.hardy
        return twin

    def check(self) -> DegeneracyReport:
        return self.report

    def hardy_validation(self, seed: int, samples: int = 1000) -> Dict[str, float]:
        """Hardy inequality on seeded random nodal vectors with u(0) = 0"""
        rng = np.random.default_rng(seed)
        c_hp = self.hardy.c_hp
        worst = math.inf
        for _ in range(samples):
            u = np.concatenate([[0.0], rng.standard_normal(self.matrices.mesh.n)])
            gradient, potential = hardy_quotients(self.matrices, u)
            worst = min(worst, (gradient - potential / c_hp) / gradient)
        holds = worst >= -Config.SOLVER_TOL
        return {"samples": samples, "seed": seed, "min_relative_slack": worst, "holds": holds}

    def _require_hypotheses(self) -> None:
        report = self.report
        if not (report.hyp1_ok and report.hyp3_ok and report.ass2_ok):
            violations = [d for d in report.diagnostics if not d.startswith("lambda")]
            raise HypothesisError("certificate refused: " + "; ".join(violations), violations)

    def gauge(self) -> LambdaGauge:
        return lambda_gauge(self.profile.lam, self.hardy, self.matrices.weights.eta_min)

    def certify(self, optimize_delta: bool = False) -> Tuple[LambdaGauge, DecayCertificate]:
        """Hypotheses first, then the lambda range, then every constant"""
        self._require_hypotheses()
        gauge = self.gauge()
        cert = compute_certificate(self.report, gauge, self.hardy, self.matrices.weights,
                                   self.profile, optimize_delta)
        return gauge, cert

    def simulate(self, settings: SimulationSettings,
                 displacement: InitialData = "bump",
                 velocity: InitialData = None) -> Tuple[Optional[Trajectory], EnergyTrace]:
        if not self.report.certifiable:
            note = "profile fails the certificate hypotheses; simulating anyway"
            logger.warning(note)
            self.processing_notes.append(note)
        state = initial_state(displacement, self.matrices.mesh, velocity)
        return simulate(self.matrices, state, settings, self.profile.lam, self.profile.beta_damp)

    def verify(self, settings: SimulationSettings,
               displacement: InitialData = "bump",
               velocity: InitialData = None,
               optimize_delta: bool = False) -> Tuple[DecayCertificate, EnergyTrace, BoundVerdict, Optional[DecayFit]]:
        """Simulates to max(t_final, 3 M) and compares the trace with the bound"""
        _, cert = self.certify(optimize_delta)
        horizon = max(settings.t_final, Config.VERIFY_HORIZON_FACTOR * cert.m_script)
        run = settings.model_copy(update={"t_final": horizon})
        _, trace = self.simulate(run, displacement, velocity)
        verdict = verify_decay_bound(trace, cert)
        fit = None
        try:
            fit = fit_decay_rate(trace)
        except FitError as exc:
            logger.warning(f"Decay fit skipped: {exc}")
        return cert, trace, verdict, fit

    def diagnose(self, settings: SimulationSettings, s: float = Config.DIAGNOSTIC_S,
                 t_end: float = Config.DIAGNOSTIC_T,
                 displacement: InitialData = "pulse") -> List[IdentityReport]:
        run = settings.model_copy(update={"t_final": t_end, "stride": 1,
                                          "store_trajectory": True})
        trajectory, _ = self.simulate(run, displacement)
        return [multiplier_residual(trajectory, self.profile, s, t_end),
                bt_identity_residual(trajectory, self.profile, s, t_end)]


class SweepRunner:
    """One certificate and one simulation per parameter value, run concurrently"""

    def __init__(self, base: Laboratory, parameter: str, settings: SimulationSettings,
                 displacement: InitialData = "bump", relative: bool = False,
                 max_workers: Optional[int] = None):
        if parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
        if relative and parameter != "lambda":
            raise ValueError("relative sweeps are only defined for lambda")
        self.base = base
        self.parameter = parameter
        self.settings = settings
        self.displacement = displacement
        self.relative = relative
        self.max_workers = max_workers

    def _laboratory(self, value: float) -> Laboratory:
        base = self.base
        profile = base.profile
        if self.parameter == "lambda":
            lam = value / base.hardy.certified_c_hp if self.relative else value
            return base.with_feedback(lam, profile.beta_damp)
        if self.parameter == "beta_damp":
            return base.with_feedback(profile.lam, value)
        if not profile.is_power_law:
            raise ValueError(f"sweeping {self.parameter} needs a power-law profile")
        params = {"alpha": profile.alpha, "mu": profile.mu, "beta_b": profile.beta_b,
                  "gamma_d": profile.gamma_d, "lam": profile.lam, "beta_damp": profile.beta_damp}
        params[self.parameter] = value
        return Laboratory(power_law_profile(**params), base.n, base.q, base.refine_levels,
                          base.path, base.points)

    def _entry(self, value: float) -> Tuple[float, float, float, bool]:
        try:
            lab = self._laboratory(value)
            _, cert = lab.certify()
            horizon = max(self.settings.t_final, cert.m_script)
            _, trace = lab.simulate(self.settings.model_copy(update={"t_final": horizon}), self.displacement)
            verdict = verify_decay_bound(trace, cert)
        except DegWaveError as exc:
            logger.warning(f"Sweep entry {self.parameter} = {value!r} refused: {exc}")
            return value, math.nan, math.nan, False
        try:
            rate = fit_decay_rate(trace).rate
        except FitError as exc:
            logger.warning(f"Sweep entry {self.parameter} = {value!r}: {exc}")
            rate = math.nan
        return value, 1.0 / cert.m_script, rate, verdict.holds

    def run(self, values: Sequence[float]) -> List[Tuple[float, float, float, bool]]:
        # shared stages are computed once before the workers start
        if self.parameter in ("lambda", "beta_damp"):
            _ = self.base.hardy
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            rows = list(pool.map(self._entry, values))
        return sorted(rows, key=lambda row: row[0])
