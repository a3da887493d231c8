"""
Exponential decay certificate
Evaluates Theta, C1..C4, delta0 and the decay time M of the bound
E(t) <= E(0) exp(1 - t / M), and checks simulated traces against it
"""

import logging
import math
from typing import List, Optional

import numpy as np
from scipy.stats import linregress

from config.config import Config
from src.core.errors import FitError, HypothesisError, InadmissibleLambdaError, InsufficientHorizonError
from src.core.models import (
    BoundVerdict, CoefficientProfile, DecayCertificate, DecayFit, DegeneracyReport,
    EnergyTrace, HardyConstants, LambdaGauge, LedgerEntry, WeightPair
)

logger = logging.getLogger(__name__)

BOUNDARY_INTERVAL_NOTE = "boundary integrals of the multiplier identity are taken over (s, T)"


def theta(report: DegeneracyReport, gauge: LambdaGauge, hardy: HardyConstants,
          weights: WeightPair, a_at_1: float) -> float:
    """Theta = (2 / 1_eps) max{1/a(1) + K_a C~_HP / (4 min eta), 1 + K_a / 4}"""
    k_a = report.k_a
    first = 1.0 / a_at_1 + k_a * hardy.certified_c_hp_tilde / (4.0 * weights.eta_min)
    second = 1.0 + k_a / 4.0
    return 2.0 / gauge.one_eps * max(first, second)


def lambda_coupling(report: DegeneracyReport) -> float:
    """1 + 3/2 K_a + K_d + M"""
    return 1.0 + 1.5 * report.k_a + report.k_d + report.m


class CertificateCalculator:
    """The delta-independent constants of the certificate and the maps delta -> C3, M"""

    def __init__(self, report: DegeneracyReport, gauge: LambdaGauge, hardy: HardyConstants,
                 weights: WeightPair, profile: CoefficientProfile):
        self.report = report
        self.gauge = gauge
        self.hardy = hardy
        self.weights = weights
        self.profile = profile

        self.lam = profile.lam
        self.beta = profile.beta_damp
        self.a_at_1 = float(profile.a(np.array([1.0]))[0])
        self.d_at_1 = float(profile.d(np.array([1.0]))[0])
        self.c_hp = hardy.certified_c_hp
        self.c_tilde = hardy.certified_c_hp_tilde

        eta1, sigma1 = weights.eta_at_1, weights.sigma_at_1
        k_a, eps0, beta = report.k_a, report.epsilon0, self.beta
        one_eps, c_lam, eta_min = gauge.one_eps, gauge.c_lambda, weights.eta_min

        self.theta = theta(report, gauge, hardy, weights, self.a_at_1)
        self.c1 = 2.0 * self.theta + 1.0 / sigma1 + 1.0 / eta1 + beta / eta1 + k_a / 4.0
        self.c2_boundary = beta ** 2 / eta1 + k_a * beta / 2.0 + beta / eta1 + k_a / 4.0
        if self.lam >= 0.0:
            self.c2_boundary += self.lam / (sigma1 * self.d_at_1)
        self.c2 = self.c2_boundary + beta * eps0 / 2.0
        self.c4 = (1.0 + c_lam ** 2 / (one_eps * eta_min ** 2)) / one_eps
        self._c3_fixed = 2.0 / one_eps + 2.0 * self.c_tilde * c_lam ** 2 / (one_eps ** 2 * eta_min ** 2)
        self._c3_inverse = 0.5 + 0.5 * (self.c_tilde + weights.eta_max) * c_lam ** 4

        self.lambda_shift = 0.0
        if self.lam < 0.0:
            self.lambda_shift = 2.0 * self.lam * self.c_hp * lambda_coupling(report)
        self.delta0 = min(eps0, eps0 + 2.0 * self.lam * self.c_hp * lambda_coupling(report)) / (self.c2 * self.c4)

    def c3(self, delta: float) -> float:
        return self._c3_fixed + self._c3_inverse / delta

    def denominator(self, delta: float) -> float:
        """eps0 - C2 C4 delta, plus 2 lambda C_HP (1 + 3/2 K_a + K_d + M) when lambda < 0"""
        return self.report.epsilon0 - self.c2 * self.c4 * delta + self.lambda_shift

    def m_script(self, delta: float) -> float:
        return (self.c1 + self.c2 * self.c3(delta)) / self.denominator(delta)

    def delta_grid(self, points: int = Config.DELTA_GRID_POINTS) -> np.ndarray:
        """Interior grid of (0, delta0)"""
        return self.delta0 * np.arange(1, points + 1) / (points + 1)

    def best_delta(self, points: int = Config.DELTA_GRID_POINTS) -> float:
        grid = self.delta_grid(points)
        values = np.array([self.m_script(d) for d in grid])
        return float(grid[int(np.argmin(values))])


def _ledger(report: DegeneracyReport, hardy: HardyConstants, lam: float) -> List[LedgerEntry]:
    c_hp = hardy.certified_c_hp
    entries = [
        LedgerEntry(name="K_a + 2K_d <= 2", lhs=report.k_a + 2.0 * report.k_d, rhs=2.0,
                    holds=report.k_a + 2.0 * report.k_d <= 2.0),
        LedgerEntry(name="hyp3", lhs=float(report.hyp3_ok), rhs=1.0, holds=report.hyp3_ok),
        LedgerEntry(name="eps0 > 0", lhs=report.epsilon0, rhs=0.0, holds=report.ass2_ok),
        LedgerEntry(name="lambda < 1/C_HP", lhs=lam, rhs=1.0 / c_hp, holds=lam * c_hp < 1.0),
    ]
    if lam < 0.0:
        lower = report.lambda_lower_bound if report.lambda_lower_bound is not None else math.nan
        entries.append(LedgerEntry(name="lambda > -eps0 / (2 C_HP (1 + 3/2 K_a + K_d + M))",
                                   lhs=lam, rhs=lower, holds=lam > lower))
    return entries


def compute_certificate(report: DegeneracyReport,
                        gauge: LambdaGauge,
                        hardy: HardyConstants,
                        weights: WeightPair,
                        profile: CoefficientProfile,
                        optimize_delta: bool = False) -> DecayCertificate:
    """All constants of the decay estimate; refuses on any failed hypothesis"""
    ledger = _ledger(report, hardy, profile.lam)

    structural = [e for e in ledger if e.name in ("K_a + 2K_d <= 2", "hyp3", "eps0 > 0") and not e.holds]
    if not report.hyp1_ok or structural:
        violations = list(report.diagnostics) or [f"{e.name} violated: lhs = {e.lhs!r}, rhs = {e.rhs!r}"
                                                  for e in structural]
        raise HypothesisError("certificate refused: " + "; ".join(violations), violations)
    for entry in ledger:
        if entry.name.startswith("lambda") and not entry.holds:
            raise InadmissibleLambdaError(entry.name, entry.lhs, entry.rhs)

    calc = CertificateCalculator(report, gauge, hardy, weights, profile)
    if not calc.delta0 > 0.0:
        raise InadmissibleLambdaError("delta0 > 0", calc.delta0, 0.0)
    ledger.append(LedgerEntry(name="delta0 > 0", lhs=calc.delta0, rhs=0.0, holds=True))

    delta = calc.best_delta() if optimize_delta else calc.delta0 / 2.0
    m_script = calc.m_script(delta)
    ledger.append(LedgerEntry(name="M > 0", lhs=m_script, rhs=0.0, holds=m_script > 0.0))
    if not (m_script > 0.0 and math.isfinite(m_script)):
        raise HypothesisError(f"M > 0 violated: lhs = {m_script!r}, rhs = 0", [ledger[-1].name])

    notes = [BOUNDARY_INTERVAL_NOTE]
    if not hardy.extrapolated:
        notes.append("Hardy constants did not stabilize under refinement; certificate is advisory")
    if optimize_delta:
        notes.append(f"delta minimizes M over a {Config.DELTA_GRID_POINTS}-point grid of (0, delta0)")

    logger.info(f"Certificate: Theta = {calc.theta:.6g}, C1..C4 = ({calc.c1:.6g}, {calc.c2:.6g}, "
                f"{calc.c3(delta):.6g}, {calc.c4:.6g}), delta0 = {calc.delta0:.6g}, M = {m_script:.6g}")

    return DecayCertificate(
        theta=calc.theta, c1=calc.c1, c2=calc.c2, c3=calc.c3(delta), c4=calc.c4,
        delta=delta, delta0=calc.delta0, m_script=m_script,
        lambda_admissible=True,
        lam=profile.lam, beta_damp=profile.beta_damp,
        k_a=report.k_a, k_d=report.k_d, m=report.m, epsilon0=report.epsilon0,
        c_hp=calc.c_hp, c_hp_tilde=calc.c_tilde,
        one_eps=gauge.one_eps, c_lambda=gauge.c_lambda,
        eta_min=weights.eta_min, eta_max=weights.eta_max,
        eta_at_1=weights.eta_at_1, sigma_at_1=weights.sigma_at_1,
        a_at_1=calc.a_at_1, d_at_1=calc.d_at_1,
        hardy_extrapolated=hardy.extrapolated,
        assumption_ledger=ledger,
        notes=notes,
    )


def verify_decay_bound(trace: EnergyTrace, cert: DecayCertificate,
                       m_script: Optional[float] = None) -> BoundVerdict:
    """E(t_n) <= E(0) e^(1 - t_n / M) (1 + slack) for every sample with t_n >= M

    m_script overrides the certified value.
    """
    m_value = cert.m_script if m_script is None else m_script
    horizon = float(trace.times[-1])
    e0 = trace.e0

    if e0 == 0.0:
        return BoundVerdict(holds=True, margin=math.inf, samples_checked=0,
                            m_script=m_value, horizon=horizon)
    if horizon < m_value:
        raise InsufficientHorizonError(
            f"trace ends at T = {horizon!r} < M = {m_value!r}; rerun with t_final >= {m_value!r}", m_value
        )

    mask = trace.times >= m_value
    times, values = trace.times[mask], trace.energy[mask]
    bound = e0 * np.exp(1.0 - times / m_value)
    holds = bool(np.all(values <= bound * (1.0 + Config.DECAY_BOUND_SLACK)))
    with np.errstate(divide="ignore"):
        ratios = np.where(values > 0.0, bound / np.where(values > 0.0, values, 1.0), np.inf)
    margin = float(np.min(ratios)) if ratios.size else math.inf

    log = logger.info if holds else logger.warning
    log(f"Decay bound with M = {m_value:.6g}: holds = {holds}, margin = {margin:.6g}, samples = {int(mask.sum())}")
    return BoundVerdict(holds=holds, margin=margin, samples_checked=int(mask.sum()),
                        m_script=m_value, horizon=horizon)


def fit_decay_rate(trace: EnergyTrace, t_start: float = 0.0) -> DecayFit:
    """Least-squares slope of ln E on [t_start, T]; rate = -slope"""
    mask = (trace.times >= t_start) & (trace.energy > Config.ENERGY_FLOOR)
    samples = int(mask.sum())
    if samples < Config.MIN_FIT_SAMPLES:
        raise FitError(f"decay fit needs {Config.MIN_FIT_SAMPLES} samples with E > "
                       f"{Config.ENERGY_FLOOR:g} after t = {t_start!r}, got {samples}")

    times = trace.times[mask]
    log_energy = np.log(trace.energy[mask])
    if np.ptp(log_energy) == 0.0:
        return DecayFit(rate=0.0, r_squared=1.0, samples=samples, t_start=t_start)

    fit = linregress(times, log_energy)
    return DecayFit(rate=-float(fit.slope), r_squared=float(fit.rvalue ** 2),
                    samples=samples, t_start=t_start)
