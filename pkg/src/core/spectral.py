"""
Hardy-Poincare constants, lambda gauge and the steady boundary problem
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from config.config import Config
from src.core.assembly import refine
from src.core.errors import ConvergenceError, InadmissibleLambdaError, SolverError, SpectralError
from src.core.models import (
    HardyConstants, LambdaGauge, OperatorMatrices, SteadyState, SymTridiagonal
)
from src.core.utils import richardson

logger = logging.getLogger(__name__)


def _factor(matrix: SymTridiagonal, name: str) -> np.ndarray:
    try:
        return cholesky_banded(matrix.to_banded())
    except LinAlgError as exc:
        raise SpectralError(f"{name} is not positive definite; pencil is indefinite") from exc


def smallest_eigenpair(stiff: SymTridiagonal,
                       mass: SymTridiagonal,
                       deflate: Optional[np.ndarray] = None,
                       tol: float = Config.EIGEN_TOL,
                       max_iter: int = Config.EIGEN_MAX_ITER) -> Tuple[float, np.ndarray]:
    """Smallest mu with stiff x = mu mass x, by inverse iteration with shift 0

    deflate: mass-normalized eigenvector to project out (gives the next eigenvalue).
    Returns mu and a mass-normalized eigenvector.
    """
    factor = _factor(stiff, "stiffness of the pencil")
    x = np.ones(stiff.size)
    if deflate is not None:
        x = np.linspace(1.0, -1.0, stiff.size)

    def project(v: np.ndarray) -> np.ndarray:
        if deflate is None:
            return v
        return v - (deflate @ mass.matvec(v)) * deflate

    x = project(x)
    x /= math.sqrt(mass.quad(x))
    value = stiff.quad(x)

    for iteration in range(1, max_iter + 1):
        y = project(cho_solve_banded((factor, False), mass.matvec(x)))
        norm = mass.quad(y)
        if not norm > 0.0:
            raise SpectralError("mass form is not positive on the iterate")
        x = y / math.sqrt(norm)
        previous, value = value, stiff.quad(x)
        if abs(value - previous) <= tol * abs(value):
            logger.debug(f"Inverse iteration converged in {iteration} steps: mu = {value:.14g}")
            return value, x

    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps "
                           f"(last Rayleigh quotient {value!r})")


def _level_constants(matrices: OperatorMatrices, with_gap: bool) -> Tuple[float, float, Optional[float]]:
    nu, vector = smallest_eigenpair(matrices.K, matrices.S)
    mu, _ = smallest_eigenpair(matrices.K0, matrices.B)
    gap = None
    if with_gap:
        nu2, _ = smallest_eigenpair(matrices.K, matrices.S, deflate=vector)
        gap = nu2 / nu
    return 1.0 / nu, 1.0 / mu, gap


def _summarize(values: List[float]) -> Tuple[float, bool, float]:
    """(reported value, extrapolated, relative safety margin)"""
    last, previous = values[-1], values[-2]
    increment = abs(last - previous)
    extrapolated = increment <= Config.EXTRAPOLATION_AGREEMENT * abs(last)
    reported = last
    if extrapolated and len(values) >= 3:
        reported = max(richardson(values[-3], previous, last), last)
    margin = Config.SAFETY_MARGIN_FACTOR * increment / reported
    return reported, extrapolated, margin


def best_constants(matrices: OperatorMatrices,
                   refine_levels: int = Config.DEFAULT_REFINE_LEVELS,
                   with_gap: bool = False) -> HardyConstants:
    """C_HP and C_HP_tilde on refine_levels nested meshes starting at matrices.mesh"""
    if refine_levels < 2:
        raise ValueError("best_constants needs at least two refinement levels")

    c_levels, tilde_levels, sizes = [], [], []
    gap = None
    level = matrices
    for index in range(refine_levels):
        if index > 0:
            level = refine(level)
        c_hp, c_tilde, gap = _level_constants(level, with_gap and index == refine_levels - 1)
        c_levels.append(c_hp)
        tilde_levels.append(c_tilde)
        sizes.append(level.mesh.n)
        logger.debug(f"N = {level.mesh.n}: C_HP = {c_hp:.12g}, C_HP_tilde = {c_tilde:.12g}")

    c_hp, extrapolated, margin = _summarize(c_levels)
    c_tilde, extrapolated_tilde, margin_tilde = _summarize(tilde_levels)
    extrapolated = extrapolated and extrapolated_tilde

    if extrapolated:
        logger.info(f"Hardy constants: C_HP = {c_hp:.10g}, C_HP_tilde = {c_tilde:.10g} (N = {sizes[-1]})")
    else:
        logger.warning(f"Hardy constants not stabilized at N = {sizes[-1]}; "
                       f"C_HP = {c_hp:.10g}, C_HP_tilde = {c_tilde:.10g} are advisory")

    return HardyConstants(
        c_hp=c_hp, c_hp_tilde=c_tilde,
        mesh_size=sizes[-1], extrapolated=extrapolated,
        c_hp_levels=c_levels, c_hp_tilde_levels=tilde_levels, level_sizes=sizes,
        margin=margin, margin_tilde=margin_tilde,
        gap_ratio=gap,
    )


def lambda_gauge(lam: float, hardy: HardyConstants, eta_min: float) -> LambdaGauge:
    """epsilon, 1_eps and C_lambda with the certified C_HP"""
    c_hp = hardy.certified_c_hp
    if lam * c_hp >= 1.0:
        raise InadmissibleLambdaError("lambda < 1/C_HP", lam, 1.0 / c_hp)

    if lam < 0.0:
        return LambdaGauge(lam=lam, epsilon=None, one_eps=1.0,
                           c_lambda=1.0 / math.sqrt(eta_min), c_hp_used=c_hp)

    epsilon = 1.0 - lam * c_hp
    return LambdaGauge(lam=lam, epsilon=epsilon, one_eps=epsilon,
                       c_lambda=1.0 / math.sqrt(epsilon * eta_min), c_hp_used=c_hp)


def steady_operator(matrices: OperatorMatrices, lam: float, beta_damp: float) -> SymTridiagonal:
    """K - lambda S + beta e_N e_N^T"""
    return matrices.operator(lam).with_corner(beta_damp)


def solve_steady(matrices: OperatorMatrices,
                 gamma: float,
                 lam: float,
                 beta_damp: float,
                 hardy: Optional[HardyConstants] = None) -> SteadyState:
    """Z with (K - lambda S + beta e_N e_N^T) Z = gamma e_N

    With Hardy constants the two a priori estimates are evaluated as well.
    """
    system = steady_operator(matrices, lam, beta_damp)
    rhs = np.zeros(system.size)
    rhs[-1] = gamma
    try:
        factor = cholesky_banded(system.to_banded())
    except LinAlgError as exc:
        margin = f"; lambda * C_HP = {lam * hardy.c_hp!r}" if hardy is not None else ""
        raise SolverError(f"steady system is not coercive{margin}") from exc

    z_free = cho_solve_banded((factor, False), rhs)
    residual = float(np.linalg.norm(system.matvec(z_free) - rhs))
    z = np.concatenate([[0.0], z_free])

    triple = system.quad(z_free)
    weighted = matrices.B.quad(z_free)

    bound_triple = bound_l2 = holds = None
    if hardy is not None:
        gauge = lambda_gauge(lam, hardy, matrices.weights.eta_min)
        c2 = gauge.c_lambda ** 2
        bound_triple = gamma ** 2 * c2
        bound_l2 = (hardy.certified_c_hp_tilde + matrices.weights.eta_max) * gamma ** 2 * c2 ** 2
        # equality holds for eta = 1, lambda = 0, beta = 0; allow solver rounding
        slack = 1.0 + Config.SOLVER_TOL
        holds = triple <= bound_triple * slack and weighted <= bound_l2 * slack

    return SteadyState(
        z=z, gamma=gamma,
        triple_norm_sq=triple, weighted_l2_sq=weighted,
        residual=residual,
        bound_triple=bound_triple, bound_l2=bound_l2, estimates_hold=holds,
    )


def hardy_quotients(matrices: OperatorMatrices, u: np.ndarray) -> Tuple[float, float]:
    """(int eta (u')^2, int u^2 / (sigma d)) for a full nodal vector with u(0) = 0"""
    free = u[1:]
    return matrices.K.quad(free), matrices.S.quad(free)


def poincare_quotients(matrices: OperatorMatrices, u: np.ndarray) -> Tuple[float, float]:
    """(int (u')^2, int u^2 / sigma)"""
    free = u[1:]
    return matrices.K0.quad(free), matrices.B.quad(free)
