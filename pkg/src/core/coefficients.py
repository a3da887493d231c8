"""
Coefficient profiles and standing hypotheses
Builds power-law and tabulated (a, b, d) triples, the Feller weight eta,
sigma = a / eta, and the degeneracy report used to gate the certificate
"""

import logging
import math
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from config.config import Config
from src.core.errors import IntegrabilityError, InvalidCoefficientError
from src.core.models import (
    CoefficientProfile, DegeneracyReport, HardyConstants, ProfileKind, WeightPair
)
from src.core.utils import central_difference, geometric_grid

logger = logging.getLogger(__name__)


def power_law_profile(alpha: float,
                      mu: float = 0.0,
                      beta_b: float = 1.0,
                      gamma_d: float = 0.25,
                      lam: float = 0.0,
                      beta_damp: float = 0.0) -> CoefficientProfile:
    """a = x^alpha, b = mu x^beta_b, d = x^gamma_d"""
    values = {"alpha": alpha, "mu": mu, "beta_b": beta_b, "gamma_d": gamma_d,
              "lambda": lam, "beta_damp": beta_damp}
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidCoefficientError(f"{name} must be finite, got {value!r}")
    if alpha <= 0.0:
        raise InvalidCoefficientError(f"a(0) = 0 requires alpha > 0, got alpha = {alpha!r}")
    if gamma_d <= 0.0:
        raise InvalidCoefficientError(f"d(0) = 0 requires gamma_d > 0, got gamma_d = {gamma_d!r}")
    if beta_damp < 0.0:
        raise InvalidCoefficientError(f"beta_damp >= 0 violated: lhs = {beta_damp!r}, rhs = 0")
    if mu != 0.0 and beta_b <= alpha - 1.0:
        raise IntegrabilityError(
            f"b/a integrable requires beta_b > alpha - 1: lhs = {beta_b!r}, rhs = {alpha - 1.0!r}"
        )

    return CoefficientProfile(
        kind=ProfileKind.POWER_LAW,
        alpha=alpha, mu=mu, beta_b=beta_b, gamma_d=gamma_d,
        lam=lam, beta_damp=beta_damp,
    )


def tabulated_profile(a_fn: Callable, b_fn: Callable, d_fn: Callable,
                      lam: float = 0.0,
                      beta_damp: float = 0.0,
                      source: Optional[str] = None) -> CoefficientProfile:
    """Profile from three samplable functions on [0, 1]; positivity checked on the sup grid"""
    if beta_damp < 0.0:
        raise InvalidCoefficientError(f"beta_damp >= 0 violated: lhs = {beta_damp!r}, rhs = 0")

    grid = geometric_grid()
    for name, fn in (("a", a_fn), ("d", d_fn)):
        at_zero = float(np.asarray(fn(np.array([0.0])))[0])
        if at_zero != 0.0:
            raise InvalidCoefficientError(f"{name}(0) = 0 violated: {name}(0) = {at_zero!r}")
        samples = np.asarray(fn(grid), dtype=float)
        if not np.all(np.isfinite(samples)):
            raise InvalidCoefficientError(f"{name} has non-finite samples on (0, 1]")
        if np.any(samples <= 0.0):
            bad = grid[samples <= 0.0][0]
            raise InvalidCoefficientError(f"{name} > 0 on (0, 1] violated at x = {bad!r}")
    b_samples = np.asarray(b_fn(np.concatenate([[0.0], grid])), dtype=float)
    if not np.all(np.isfinite(b_samples)):
        raise InvalidCoefficientError("b has non-finite samples on [0, 1]")

    return CoefficientProfile(
        kind=ProfileKind.TABULATED,
        lam=lam, beta_damp=beta_damp,
        a_fn=a_fn, b_fn=b_fn, d_fn=d_fn,
        source=source,
    )


class LogLogCurve:
    """PCHIP interpolant of a positive degenerate coefficient in log-log coordinates

    Below the first positive sample the curve continues as the power law
    fitted to the first two samples; the value at x = 0 is 0.
    """

    def __init__(self, x: np.ndarray, values: np.ndarray):
        positive = x > 0.0
        log_x = np.log(x[positive])
        log_v = np.log(values[positive])
        self._interp = PchipInterpolator(log_x, log_v, extrapolate=False)
        self._log_x_min = log_x[0]
        self._log_v_min = log_v[0]
        self._tail_slope = (log_v[1] - log_v[0]) / (log_x[1] - log_x[0])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.zeros_like(flat)
        positive = flat > 0.0
        log_x = np.log(np.minimum(flat[positive], 1.0))
        tail = log_x < self._log_x_min
        logs = np.empty_like(log_x)
        logs[tail] = self._log_v_min + self._tail_slope * (log_x[tail] - self._log_x_min)
        logs[~tail] = self._interp(log_x[~tail])
        out[positive] = np.exp(logs)
        return out.reshape(x.shape)


class LinearCurve:
    """PCHIP interpolant of the drift in linear coordinates"""

    def __init__(self, x: np.ndarray, values: np.ndarray):
        self._interp = PchipInterpolator(x, values, extrapolate=True)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self._interp(np.clip(np.asarray(x, dtype=float), 0.0, 1.0)))


def load_tabulated_csv(path: Path, lam: float = 0.0, beta_damp: float = 0.0) -> CoefficientProfile:
    """Read a profile from a CSV with header x,a,b,d"""
    path = Path(path)
    try:
        table = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise InvalidCoefficientError(f"cannot read tabulated profile {path}: {exc}") from exc

    missing = {"x", "a", "b", "d"} - set(table.dtype.names or ())
    if missing:
        raise InvalidCoefficientError(f"{path}: missing columns {sorted(missing)}")

    x = np.asarray(table["x"], dtype=float)
    order = np.argsort(x)
    x = x[order]
    a, b, d = (np.asarray(table[c], dtype=float)[order] for c in ("a", "b", "d"))

    if np.any(np.diff(x) <= 0.0) or x[0] < 0.0 or x[-1] != 1.0:
        raise InvalidCoefficientError(f"{path}: abscissae must be distinct, in [0, 1] and end at 1")
    if np.count_nonzero(x > 0.0) < 2:
        raise InvalidCoefficientError(f"{path}: need at least two samples with x > 0")
    if np.any(a[x > 0.0] <= 0.0) or np.any(d[x > 0.0] <= 0.0):
        raise InvalidCoefficientError(f"{path}: a and d must be positive for x > 0")

    logger.info(f"Loaded tabulated profile {path} with {len(x)} samples")
    return tabulated_profile(LogLogCurve(x, a), LinearCurve(x, b), LogLogCurve(x, d),
                             lam=lam, beta_damp=beta_damp, source=str(path))


def degeneracy_exponent(g: Callable, exponent: Optional[float] = None) -> float:
    """K_g = sup over (0, 1] of x |g'(x)| / g(x)

    Power laws pass their exponent and get it back unchanged. Otherwise the
    sup is taken over the geometric grid with a doubling uniform fill until
    it stabilizes.
    """
    if exponent is not None:
        return float(exponent)

    previous = None
    fill = Config.UNIFORM_FILL
    for _ in range(Config.MAX_SUP_REFINEMENTS + 1):
        grid = geometric_grid(fill=fill)
        values = np.asarray(g(grid), dtype=float)
        slopes = central_difference(g, grid)
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
            raise InvalidCoefficientError("non-finite samples while computing the degeneracy exponent")
        current = float(np.max(grid * np.abs(slopes) / values))
        if previous is not None and abs(current - previous) <= Config.DEGENERACY_REL_TOL * abs(current):
            return current
        previous = current
        fill *= 2

    logger.warning(f"Degeneracy exponent did not stabilize; reporting {previous:.10g}")
    return previous


def classify(k: float) -> str:
    if 0.0 < k < 1.0:
        return "WD"
    if 1.0 <= k < 2.0:
        return "SD"
    return "neither"


def singular_exponents(profile: CoefficientProfile, k_a: float, k_d: float) -> Tuple[float, float]:
    """Exponents p with 1/sigma ~ x^-p and 1/(sigma d) ~ x^-p near 0"""
    if profile.is_power_law:
        return profile.alpha, profile.alpha + profile.gamma_d
    return k_a, k_a + k_d


class PowerLawEta:
    """eta(x) = exp(mu (x^r - 2^-r) / r)"""

    def __init__(self, mu: float, r: float):
        self.mu = mu
        self.r = r

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mu == 0.0:
            return np.ones_like(x)
        return np.exp(self.mu * (x ** self.r - 0.5 ** self.r) / self.r)


class QuadratureEta:
    """eta(x) = exp(F(x) - F(1/2)) with F(x) = int_0^x b/a by adaptive quadrature

    F is tabulated at geometric and uniform anchors; a point value adds one
    quadrature from the nearest anchor below. The piece next to 0 is
    integrated in u = ln x so the endpoint singularity of b/a is smooth.
    """

    def __init__(self, profile: CoefficientProfile):
        self.profile = profile
        geometric = 2.0 ** -np.arange(Config.GEOMETRIC_GRID_DEPTH + 1, dtype=float)
        uniform = np.arange(1, Config.ETA_UNIFORM_ANCHORS + 1, dtype=float) / Config.ETA_UNIFORM_ANCHORS
        self.anchors = np.unique(np.concatenate([geometric, uniform, [0.5]]))

        cumulative = np.empty_like(self.anchors)
        cumulative[0] = self._from_zero(self.anchors[0])
        for i in range(1, len(self.anchors)):
            cumulative[i] = cumulative[i - 1] + self._piece(self.anchors[i - 1], self.anchors[i])
        self.cumulative = cumulative
        self.offset = float(cumulative[np.searchsorted(self.anchors, 0.5)])

    def _ratio(self, x: float) -> float:
        return float(self.profile.b_over_a(np.array([x]))[0])

    def _check(self, result, lo: float, hi: float) -> float:
        if len(result) > 3 or not math.isfinite(result[0]):
            raise IntegrabilityError(f"quadrature of b/a on [{lo!r}, {hi!r}] did not converge")
        return float(result[0])

    def _piece(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        result = quad(self._ratio, lo, hi, epsabs=Config.ETA_ABS_TOL, epsrel=Config.ETA_REL_TOL,
                      full_output=1)
        return self._check(result, lo, hi)

    def _from_zero(self, hi: float) -> float:
        if hi <= 0.0:
            return 0.0
        integrand = lambda u: self._ratio(math.exp(u)) * math.exp(u)
        result = quad(integrand, -np.inf, math.log(hi), epsabs=Config.ETA_ABS_TOL,
                      epsrel=Config.ETA_REL_TOL, full_output=1)
        return self._check(result, 0.0, hi)

    def primitive(self, x: float) -> float:
        """F(x) = int_0^x b/a"""
        if x <= 0.0:
            return 0.0
        idx = int(np.searchsorted(self.anchors, x, side="right")) - 1
        if idx < 0:
            return self._from_zero(x)
        return float(self.cumulative[idx]) + self._piece(float(self.anchors[idx]), x)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        values = np.array([self.primitive(float(xi)) for xi in flat])
        return np.exp(values - self.offset).reshape(x.shape)

    def anchor_values(self) -> np.ndarray:
        return np.exp(self.cumulative - self.offset)


class SigmaFunction:
    """sigma = a / eta"""

    def __init__(self, profile: CoefficientProfile, eta: Callable):
        self.profile = profile
        self.eta = eta

    def __call__(self, x) -> np.ndarray:
        return self.profile.a(x) / self.eta(x)


def feller_weight(profile: CoefficientProfile, method: Optional[str] = None) -> WeightPair:
    """Feller weight eta anchored at 1/2 and sigma = a / eta

    method: "closed-form" (power laws only) or "quadrature"; defaults to the
    closed form whenever it exists.
    """
    if method is None:
        method = "closed-form" if profile.is_power_law else "quadrature"
    if method == "closed-form" and not profile.is_power_law:
        raise InvalidCoefficientError("closed-form Feller weight needs a power-law profile")

    if method == "closed-form":
        eta = PowerLawEta(profile.mu, profile.r)
        samples = eta(np.concatenate([[0.0], geometric_grid()]))
    else:
        eta = QuadratureEta(profile)
        samples = np.concatenate([[1.0 / math.exp(eta.offset)], eta.anchor_values()])

    if not np.all(np.isfinite(samples)) or np.any(samples <= 0.0):
        raise IntegrabilityError("Feller weight is not finite and positive on [0, 1]")

    eta_at_1 = float(eta(np.array([1.0]))[0])
    sigma_at_1 = float(profile.a(np.array([1.0]))[0]) / eta_at_1
    logger.debug(f"Feller weight ({method}): eta(1) = {eta_at_1:.12g}, "
                 f"range [{samples.min():.6g}, {samples.max():.6g}]")

    return WeightPair(
        eta=eta,
        sigma=SigmaFunction(profile, eta),
        eta_min=float(samples.min()),
        eta_max=float(samples.max()),
        eta_at_1=eta_at_1,
        sigma_at_1=sigma_at_1,
        method=method,
    )


class HypothesisChecker:
    """Evaluates the standing hypotheses and collects violated conditions"""

    def __init__(self):
        self.diagnostics: List[str] = []

    def check(self, profile: CoefficientProfile, hardy: HardyConstants) -> DegeneracyReport:
        self.diagnostics = []
        grid = geometric_grid()

        k_a = degeneracy_exponent(profile.a, profile.alpha if profile.is_power_law else None)
        k_d = degeneracy_exponent(profile.d, profile.gamma_d if profile.is_power_law else None)
        a_class, d_class = classify(k_a), classify(k_d)
        p_sigma, p_sigma_d = singular_exponents(profile, k_a, k_d)

        a_at_1 = float(profile.a(np.array([1.0]))[0])
        m_tilde, drift_sup = self._drift_bounds(profile, grid, a_at_1)
        drift_bound_ok = math.isfinite(drift_sup) and drift_sup <= Config.DRIFT_BOUND_LIMIT
        m = m_tilde if k_a <= 1.0 else drift_sup

        # Ass2: (2 - K_a - 2K_d) - 2 x|b|/a >= eps0 on [0, 1]; the x -> 0 limit of x b / a is 0
        epsilon0 = (2.0 - k_a - 2.0 * k_d) - 2.0 * drift_sup

        hyp1_ok = self._check_hyp1(profile)
        monotone_a_ok = self._nondecreasing(grid, grid ** k_a / profile.a(grid), "x^K_a / a")
        monotone_d_ok = self._nondecreasing(grid, grid ** k_d / profile.d(grid), "x^K_d / d")
        self._check_drift_envelope(profile, grid, k_a, m_tilde)

        hyp3_ok = True
        if a_class == "neither" or d_class == "neither":
            self._violation(f"a and d must be (WD) or (SD): K_a = {k_a!r} ({a_class}), K_d = {k_d!r} ({d_class})")
            hyp3_ok = False
        if k_a + 2.0 * k_d > 2.0:
            self._violation(f"K_a + 2K_d <= 2 violated: lhs = {k_a + 2.0 * k_d!r}, rhs = 2")
            hyp3_ok = False
        if k_a > 1.0 and not drift_bound_ok:
            self._violation(f"x b / a bounded violated for K_a = {k_a!r} > 1: sup = {drift_sup!r}")
            hyp3_ok = False

        ass2_ok = epsilon0 > 0.0
        if not ass2_ok:
            self._violation(f"eps0 > 0 violated: lhs = {epsilon0!r}, rhs = 0")

        c_hp = hardy.certified_c_hp
        upper = 1.0 / c_hp
        hyp2_ok = profile.lam * c_hp < 1.0
        if not hyp2_ok:
            self._violation(f"lambda < 1/C_HP violated: lhs = {profile.lam!r}, rhs = {upper!r}")

        lower = None
        if ass2_ok:
            lower = -epsilon0 / (2.0 * c_hp * (1.0 + 1.5 * k_a + k_d + m))
        lambda_range_ok = hyp2_ok
        if profile.lam < 0.0 and (lower is None or profile.lam <= lower):
            rhs = lower if lower is not None else float("nan")
            self._violation(
                f"lambda > -eps0 / (2 C_HP (1 + 3/2 K_a + K_d + M)) violated: lhs = {profile.lam!r}, rhs = {rhs!r}"
            )
            lambda_range_ok = False

        intro_ok = None
        if profile.is_power_law:
            intro_ok = (profile.beta_b > 0.0 and profile.beta_b > profile.alpha - 1.0
                        and 2.0 - profile.alpha - 2.0 * profile.gamma_d > 2.0 * abs(profile.mu))

        report = DegeneracyReport(
            k_a=k_a, k_d=k_d, a_class=a_class, d_class=d_class,
            m_tilde=m_tilde, m=m, epsilon0=epsilon0,
            hyp1_ok=hyp1_ok and monotone_a_ok and monotone_d_ok,
            hyp2_ok=hyp2_ok, hyp3_ok=hyp3_ok, ass2_ok=ass2_ok,
            lambda_range_ok=lambda_range_ok,
            lambda_upper_bound=upper, lambda_lower_bound=lower,
            p_sigma=p_sigma, p_sigma_d=p_sigma_d,
            intro_conditions_ok=intro_ok,
            monotone_a_ok=monotone_a_ok, monotone_d_ok=monotone_d_ok,
            drift_bound_ok=drift_bound_ok,
            diagnostics=list(self.diagnostics),
        )
        logger.info(f"Hypotheses: K_a = {k_a:.6g}, K_d = {k_d:.6g}, eps0 = {epsilon0:.6g}, "
                    f"certifiable = {report.certifiable}")
        return report

    def _violation(self, message: str) -> None:
        logger.warning(message)
        self.diagnostics.append(message)

    def _drift_bounds(self, profile: CoefficientProfile, grid: np.ndarray, a_at_1: float) -> Tuple[float, float]:
        """(M_tilde, sup |x b / a|)"""
        if profile.is_power_law:
            if profile.mu == 0.0:
                return 0.0, 0.0
            if profile.beta_b < 0.0:
                return math.inf, abs(profile.mu)
            return abs(profile.mu) / a_at_1, abs(profile.mu)
        b_sup = float(np.max(np.abs(profile.b(np.concatenate([[0.0], grid])))))
        drift = np.abs(profile.x_b_over_a(grid))
        return b_sup / a_at_1, float(np.max(drift)) if np.all(np.isfinite(drift)) else math.inf

    def _check_hyp1(self, profile: CoefficientProfile) -> bool:
        if not profile.is_power_law:
            return True
        ok = True
        if profile.mu != 0.0 and profile.beta_b < 0.0:
            self._violation(f"b continuous on [0, 1] requires beta_b >= 0: lhs = {profile.beta_b!r}, rhs = 0")
            ok = False
        return ok

    def _nondecreasing(self, grid: np.ndarray, values: np.ndarray, name: str) -> bool:
        steps = np.diff(values)
        if np.all(steps >= -1e-9 * np.abs(values[1:])):
            return True
        self._violation(f"{name} nondecreasing on (0, 1] violated on the sample grid")
        return False

    def _check_drift_envelope(self, profile: CoefficientProfile, grid: np.ndarray,
                              k_a: float, m_tilde: float) -> None:
        if not math.isfinite(m_tilde):
            return
        envelope = np.abs(grid ** k_a * profile.b(grid) / profile.a(grid))
        if np.max(envelope) > m_tilde * (1.0 + 1e-9) + 1e-300:
            self._violation(f"|x^K_a b / a| <= M_tilde violated: sup = {np.max(envelope)!r}, M_tilde = {m_tilde!r}")


def check_hypotheses(profile: CoefficientProfile, hardy: HardyConstants) -> DegeneracyReport:
    """Degeneracy report for a profile given its Hardy constants"""
    return HypothesisChecker().check(profile, hardy)
