"""
Utility functions for the degenerate wave laboratory
"""

import math
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import roots_legendre

from config.config import Config


def geometric_grid(depth: int = Config.GEOMETRIC_GRID_DEPTH,
                   fill: int = Config.UNIFORM_FILL) -> np.ndarray:
    """Sample grid on (0, 1] clustered at 0: 2^-j for j = 0..depth plus a uniform fill"""
    geometric = 2.0 ** -np.arange(depth + 1, dtype=float)
    uniform = np.arange(1, fill + 1, dtype=float) / fill
    return np.unique(np.concatenate([geometric, uniform]))


def central_difference(fn: Callable[[np.ndarray], np.ndarray],
                       x: np.ndarray,
                       rel_step: float = Config.DERIVATIVE_REL_STEP) -> np.ndarray:
    """Central difference with step h = rel_step * x; one-sided at x = 1"""
    x = np.asarray(x, dtype=float)
    h = rel_step * np.maximum(x, np.finfo(float).tiny)
    right = np.minimum(x + h, 1.0)
    left = x - h
    return (np.asarray(fn(right)) - np.asarray(fn(left))) / (right - left)


def gauss_legendre_unit(points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]"""
    nodes, weights = roots_legendre(points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def relative_gap(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|, 1)"""
    return abs(a - b) / max(abs(a), abs(b), 1.0)


def relative_residual(lhs: float, rhs: float) -> float:
    return relative_gap(lhs, rhs)


def richardson(coarse: float, middle: float, fine: float) -> float:
    """Aitken-type extrapolant of three nested-mesh values

    Falls back to the finest value when the increments do not contract.
    """
    d1 = middle - coarse
    d2 = fine - middle
    if d1 == 0.0 or d2 == 0.0:
        return fine
    ratio = d2 / d1
    if not 0.0 < ratio < 1.0:
        return fine
    return fine + d2 * ratio / (1.0 - ratio)


def observed_order(e_coarse: float, e_middle: float, e_fine: float, factor: float = 2.0) -> float:
    """Order p from three values at h, h/f, h/f^2"""
    d1 = abs(e_coarse - e_middle)
    d2 = abs(e_middle - e_fine)
    if d1 == 0.0 or d2 == 0.0:
        return math.inf
    return math.log(d1 / d2) / math.log(factor)


def time_integral(values: np.ndarray, times: np.ndarray) -> float:
    """Trapezoid rule over recorded samples"""
    if len(times) < 2:
        return 0.0
    return float(trapezoid(values, times))
