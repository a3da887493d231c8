"""
Finite element assembly on graded meshes
Hat-function discretization of the weighted mass, stiffness and singular
potential forms, with product integration against the x^-p singularity
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded
from scipy.special import comb

from config.config import Config
from src.core.coefficients import degeneracy_exponent, singular_exponents
from src.core.errors import AssemblyError, IntegrabilityError
from src.core.models import (
    CoefficientProfile, Mesh, OperatorMatrices, SymTridiagonal, WeightPair
)
from src.core.utils import gauss_legendre_unit

logger = logging.getLogger(__name__)


def grading_strength(k_a: float) -> float:
    """q = max(1, 2 / (2 - K_a)) clamped to [1, 4]"""
    if k_a >= 2.0:
        return Config.MAX_GRADING
    return min(max(1.0, 2.0 / (2.0 - k_a)), Config.MAX_GRADING)


def build_mesh(n: int, profile: CoefficientProfile, q: Optional[float] = None) -> Mesh:
    """Graded mesh for a profile; q overrides the automatic grading"""
    if n < Config.MIN_ELEMENTS:
        raise AssemblyError(f"mesh needs N >= {Config.MIN_ELEMENTS} elements, got {n}")
    if q is None:
        k_a = degeneracy_exponent(profile.a, profile.alpha if profile.is_power_law else None)
        q = grading_strength(k_a)
    logger.debug(f"Graded mesh N = {n}, q = {q}")
    return Mesh.graded(n, q)


def _power_integral(x_l: np.ndarray, x_r: np.ndarray, e: float) -> np.ndarray:
    """int_{x_l}^{x_r} x^(e - 1) dx, elementwise"""
    out = np.empty_like(x_r, dtype=float)
    at_zero = x_l == 0.0
    if np.any(at_zero):
        if e <= 0.0:
            raise IntegrabilityError(f"x^{e - 1.0!r} is not integrable at 0")
        out[at_zero] = x_r[at_zero] ** e / e
    inner = ~at_zero
    if np.any(inner):
        log_ratio = np.log(x_r[inner] / x_l[inner])
        if e == 0.0:
            out[inner] = log_ratio
        else:
            out[inner] = x_l[inner] ** e * np.expm1(e * log_ratio) / e
    return out


def singular_moment(x_l: float, x_r: float, p: float, k: int) -> float:
    """int_{x_l}^{x_r} x^(k - p) dx"""
    if not 0.0 <= x_l < x_r:
        raise ValueError(f"need 0 <= x_l < x_r, got ({x_l!r}, {x_r!r})")
    if k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    value = _power_integral(np.array([x_l], dtype=float), np.array([x_r], dtype=float), k - p + 1.0)
    return float(value[0])


def shifted_moments(x_l: np.ndarray, h: np.ndarray, p: float, j_max: int) -> np.ndarray:
    """J_j = int_{x_l}^{x_l + h} (x - x_l)^j x^-p dx for j = 0..j_max

    Elements touching 0 use the closed form, nan where the moment diverges;
    elements with h / x_l above the switch expand (x - x_l)^j binomially;
    the rest integrate x_l^(j + 1 - p) t^j (1 + t)^-p over [0, h / x_l]
    by Gauss-Legendre.
    """
    x_l = np.asarray(x_l, dtype=float)
    h = np.asarray(h, dtype=float)
    moments = np.empty((x_l.shape[0], j_max + 1))

    at_zero = x_l == 0.0
    tau = np.divide(h, x_l, out=np.full_like(h, np.inf), where=~at_zero)
    wide = ~at_zero & (tau > Config.SHIFTED_MOMENT_SWITCH)
    narrow = ~at_zero & ~wide

    for j in range(j_max + 1):
        if np.any(at_zero):
            e = j - p + 1.0
            moments[at_zero, j] = _power_integral(x_l[at_zero], h[at_zero], e) if e > 0.0 else np.nan

        if np.any(wide):
            xl, xr = x_l[wide], x_l[wide] + h[wide]
            total = np.zeros_like(xl)
            for i in range(j + 1):
                total += comb(j, i) * (-xl) ** (j - i) * _power_integral(xl, xr, i - p + 1.0)
            moments[wide, j] = total

    if np.any(narrow):
        s, w = gauss_legendre_unit(Config.SHIFTED_MOMENT_POINTS)
        t = tau[narrow, None] * s[None, :]
        scale = tau[narrow, None] * w[None, :] * (1.0 + t) ** (-p)
        xl = x_l[narrow]
        for j in range(j_max + 1):
            moments[narrow, j] = xl ** (j + 1.0 - p) * np.sum(scale * t ** j, axis=1)

    return moments


class SingularRule:
    """Per-element product integration of x^-p g(x) P(s), s = (x - x_l) / h

    Interior weights make the rule exact for x^-p times any polynomial of
    degree < points. On the element touching 0 only s^m P(s) integrands
    occur (the x = 0 node is eliminated), so its weights are fitted to
    x^-p s^(m + k) instead.
    """

    def __init__(self, mesh: Mesh, p: float, points: int = Config.GAUSS_POINTS):
        self.mesh = mesh
        self.p = p
        self.points = points
        self.s, _ = gauss_legendre_unit(points)
        h = mesh.h
        self.x = mesh.nodes[:-1, None] + h[:, None] * self.s[None, :]
        self._weights = {}

    def weights(self, m: int) -> np.ndarray:
        """(n, points) weights; row 0 fitted to s^(m + k), other rows to s^k"""
        if m not in self._weights:
            h = self.mesh.h
            x_l = self.mesh.nodes[:-1]
            w = np.empty((self.mesh.n, self.points))

            exponents = np.arange(self.points)
            vandermonde = self.s[None, :] ** exponents[:, None]
            if self.mesh.n > 1:
                moments = shifted_moments(x_l[1:], h[1:], self.p, self.points - 1)
                moments = moments / h[1:, None] ** exponents[None, :]
                w[1:] = np.linalg.solve(vandermonde, moments.T).T

            shifted = self.s[None, :] ** (m + exponents[:, None])
            first = shifted_moments(x_l[:1], h[:1], self.p, m + self.points - 1)[0, m:]
            first = first / h[0] ** (m + exponents)
            w[0] = np.linalg.solve(shifted, first)
            self._weights[m] = w
        return self._weights[m]

    def mass_entries(self, g_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Element integrals of x^-p g phi_l phi_l, phi_l phi_r, phi_r phi_r

        Row 0 carries only the phi_r phi_r entry.
        """
        w = self.weights(2)
        s = self.s[None, :]
        ll = np.sum(w * g_values * (1.0 - s) ** 2, axis=1)
        lr = np.sum(w * g_values * (1.0 - s) * s, axis=1)
        rr = np.sum(w * g_values * s * s, axis=1)
        ll[0] = 0.0
        lr[0] = 0.0
        return ll, lr, rr

    def load_entries(self, g_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Element integrals of x^-p g phi_l and x^-p g phi_r"""
        w = self.weights(1)
        s = self.s[None, :]
        left = np.sum(w * g_values * (1.0 - s), axis=1)
        right = np.sum(w * g_values * s, axis=1)
        left[0] = 0.0
        return left, right


def _check_finite(values: np.ndarray, label: str) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise AssemblyError(f"non-finite {label} integral on element {int(bad[0])}")


def _scatter(mesh: Mesh, ll: np.ndarray, lr: np.ndarray, rr: np.ndarray) -> SymTridiagonal:
    """Global tridiagonal matrix with the x = 0 row and column removed"""
    diag = np.zeros(mesh.n + 1)
    diag[:-1] += ll
    diag[1:] += rr
    return SymTridiagonal(diag=diag[1:], off=np.array(lr[1:]))


def assemble_weighted_mass(mesh: Mesh, p: float, g: Callable,
                           points: int = Config.GAUSS_POINTS,
                           label: str = "mass") -> SymTridiagonal:
    """int x^-p g phi_i phi_j"""
    rule = SingularRule(mesh, p, points)
    g_values = np.asarray(g(rule.x), dtype=float)
    ll, lr, rr = rule.mass_entries(g_values)
    for values in (ll, lr, rr):
        _check_finite(values, label)
    return _scatter(mesh, ll, lr, rr)


def assemble_weighted_stiffness(mesh: Mesh, g: Callable,
                                points: int = Config.GAUSS_POINTS,
                                label: str = "stiffness") -> SymTridiagonal:
    """int g phi_i' phi_j' with g sampled at Gauss points"""
    s, w = gauss_legendre_unit(points)
    h = mesh.h
    x = mesh.nodes[:-1, None] + h[:, None] * s[None, :]
    integral = h * np.sum(w[None, :] * np.asarray(g(x), dtype=float), axis=1)
    _check_finite(integral, label)
    k = integral / h ** 2
    return _scatter(mesh, k, -k, k)


def assemble_weighted_load(mesh: Mesh, p: float, g: Callable,
                           points: int = Config.GAUSS_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """Per-element int x^-p g phi_l and int x^-p g phi_r"""
    rule = SingularRule(mesh, p, points)
    left, right = rule.load_entries(np.asarray(g(rule.x), dtype=float))
    _check_finite(left, "load")
    _check_finite(right, "load")
    return left, right


def exact_power_mass(mesh: Mesh, p: float) -> SymTridiagonal:
    """int x^-p phi_i phi_j from exact moments"""
    h = mesh.h
    moments = shifted_moments(mesh.nodes[:-1], h, p, 2)
    j0, j1, j2 = moments[:, 0], moments[:, 1], moments[:, 2]
    ll = j0 - 2.0 * j1 / h + j2 / h ** 2
    lr = j1 / h - j2 / h ** 2
    rr = j2 / h ** 2
    ll[0] = 0.0
    lr[0] = 0.0
    for values in (ll, lr, rr):
        _check_finite(values, "exact mass")
    return _scatter(mesh, ll, lr, rr)


def unit_stiffness(mesh: Mesh) -> SymTridiagonal:
    """int phi_i' phi_j'"""
    k = 1.0 / mesh.h
    return _scatter(mesh, k, -k, k)


class _TabulatedFactor:
    """x^p times a weight divided by coefficient values; bounded near 0"""

    def __init__(self, p: float, eta: Callable, *divisors: Callable):
        self.p = p
        self.eta = eta
        self.divisors = divisors

    def __call__(self, x) -> np.ndarray:
        value = x ** self.p * self.eta(x)
        for fn in self.divisors:
            value = value / fn(x)
        return value


def _positive_definite(matrix: SymTridiagonal, name: str) -> None:
    try:
        cholesky_banded(matrix.to_banded())
    except LinAlgError as exc:
        raise AssemblyError(f"{name} is not positive definite after Dirichlet elimination") from exc


def assemble(profile: CoefficientProfile,
             weights: WeightPair,
             mesh: Mesh,
             path: str = "auto",
             points: int = Config.GAUSS_POINTS,
             exponents: Optional[Tuple[float, float]] = None) -> OperatorMatrices:
    """B, K, K0 and S on a mesh

    path "exact" integrates the power weights by closed-form moments and
    needs a drift-free power law; "gauss" uses product integration with the
    smooth factor at Gauss points; "auto" picks exact whenever allowed.
    """
    if path == "auto":
        path = "exact" if profile.drift_free else "gauss"
    if path == "exact" and not profile.drift_free:
        raise AssemblyError("exact-moment assembly needs a drift-free power-law profile")

    if exponents is None:
        if profile.is_power_law:
            exponents = singular_exponents(profile, profile.alpha, profile.gamma_d)
        else:
            k_a = degeneracy_exponent(profile.a)
            k_d = degeneracy_exponent(profile.d)
            exponents = singular_exponents(profile, k_a, k_d)
    p_mass, p_potential = exponents

    if path == "exact":
        mass = exact_power_mass(mesh, p_mass)
        potential = exact_power_mass(mesh, p_potential)
        stiffness = unit_stiffness(mesh)
    else:
        if profile.is_power_law:
            g_mass = g_potential = weights.eta
        else:
            g_mass = _TabulatedFactor(p_mass, weights.eta, profile.a)
            g_potential = _TabulatedFactor(p_potential, weights.eta, profile.a, profile.d)
        mass = assemble_weighted_mass(mesh, p_mass, g_mass, points, "1/sigma mass")
        potential = assemble_weighted_mass(mesh, p_potential, g_potential, points, "1/(sigma d) mass")
        stiffness = assemble_weighted_stiffness(mesh, weights.eta, points, "eta stiffness")

    k0 = unit_stiffness(mesh)
    _positive_definite(mass, "B")
    _positive_definite(stiffness, "K")
    _positive_definite(k0, "K0")
    if np.any(potential.diag < 0.0):
        raise AssemblyError("S has a negative diagonal entry")

    logger.debug(f"Assembled N = {mesh.n} ({path}), p = ({p_mass}, {p_potential})")
    return OperatorMatrices(
        B=mass, K=stiffness, K0=k0, S=potential,
        mesh=mesh, profile=profile, weights=weights,
        quadrature=path, gauss_points=points,
        p_mass=p_mass, p_potential=p_potential,
    )


def refine(matrices: OperatorMatrices) -> OperatorMatrices:
    """Same assembly on the nested mesh with 2N elements"""
    return assemble(matrices.profile, matrices.weights, matrices.mesh.refined(),
                    path=matrices.quadrature, points=matrices.gauss_points,
                    exponents=(matrices.p_mass, matrices.p_potential))


def interpolate(mesh: Mesh, fn: Callable) -> np.ndarray:
    """Nodal interpolant, node 0 included; always a fresh writable array"""
    return np.array(fn(mesh.nodes), dtype=float, copy=True)


def weighted_l2_sq(matrices: OperatorMatrices, u: np.ndarray) -> float:
    """||u||^2 in L^2_{1/sigma} for a full nodal vector"""
    return matrices.B.quad(u[1:])


def gradient_energy(matrices: OperatorMatrices, u: np.ndarray) -> float:
    """int eta (u')^2"""
    return matrices.K.quad(u[1:])


def potential_energy(matrices: OperatorMatrices, u: np.ndarray) -> float:
    """int u^2 / (sigma d)"""
    return matrices.S.quad(u[1:])


def is_symmetric(matrix: SymTridiagonal) -> bool:
    dense = matrix.to_sparse().toarray()
    return float(np.max(np.abs(dense - dense.T))) == 0.0 if dense.size else True

