"""
Data models for the degenerate wave laboratory
Defines Pydantic schemas for coefficient profiles, discrete operators,
trajectories, Hardy constants and decay certificates
"""

from enum import Enum
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
import scipy.sparse as sparse
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config.config import Config


ScalarFunction = Callable[[np.ndarray], np.ndarray]


class FrozenModel(BaseModel):
    """Immutable model; numpy fields are stored as read-only copies"""
    model_config = ConfigDict(
        frozen=True,
        arbitrary_types_allowed=True,
        ser_json_inf_nan="constants",
    )

    @field_validator("*", mode="after")
    @classmethod
    def _read_only_arrays(cls, value):
        if isinstance(value, np.ndarray):
            value = np.array(value, dtype=float, copy=True)
            value.flags.writeable = False
        return value


class ProfileKind(str, Enum):
    """Coefficient representations"""
    POWER_LAW = "power-law"
    TABULATED = "tabulated"


class CoefficientProfile(FrozenModel):
    """The triple (a, b, d) with the singular coefficient and the feedback gain

    Power law: a = x^alpha, b = mu x^beta_b, d = x^gamma_d.
    Tabulated: three samplable functions on [0, 1].
    """
    kind: ProfileKind
    alpha: Optional[float] = None
    mu: float = 0.0
    beta_b: float = 1.0
    gamma_d: Optional[float] = None
    lam: float = 0.0
    beta_damp: float = Field(0.0, ge=0.0)
    a_fn: Optional[ScalarFunction] = Field(None, exclude=True)
    b_fn: Optional[ScalarFunction] = Field(None, exclude=True)
    d_fn: Optional[ScalarFunction] = Field(None, exclude=True)
    source: Optional[str] = None

    @property
    def is_power_law(self) -> bool:
        return self.kind == ProfileKind.POWER_LAW

    @property
    def drift_free(self) -> bool:
        return self.is_power_law and self.mu == 0.0

    @property
    def r(self) -> float:
        """Exponent of x b / a for power laws"""
        return self.beta_b - self.alpha + 1.0

    def a(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_power_law:
            return x ** self.alpha
        return np.asarray(self.a_fn(x), dtype=float)

    def b(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_power_law:
            if self.mu == 0.0:
                return np.zeros_like(x)
            return self.mu * x ** self.beta_b
        return np.asarray(self.b_fn(x), dtype=float)

    def d(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_power_law:
            return x ** self.gamma_d
        return np.asarray(self.d_fn(x), dtype=float)

    def b_over_a(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_power_law:
            if self.mu == 0.0:
                return np.zeros_like(x)
            return self.mu * x ** (self.r - 1.0)
        return self.b(x) / self.a(x)

    def x_b_over_a(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_power_law:
            if self.mu == 0.0:
                return np.zeros_like(x)
            return self.mu * x ** self.r
        return x * self.b(x) / self.a(x)


class WeightPair(FrozenModel):
    """Feller weight eta and sigma = a / eta with their extrema"""
    eta: ScalarFunction = Field(exclude=True)
    sigma: ScalarFunction = Field(exclude=True)
    eta_min: float
    eta_max: float
    eta_at_1: float
    sigma_at_1: float
    method: Literal["closed-form", "quadrature"]


class DegeneracyReport(FrozenModel):
    """Degeneracy exponents, drift bounds and hypothesis verdicts"""
    k_a: float
    k_d: float
    a_class: Literal["WD", "SD", "neither"]
    d_class: Literal["WD", "SD", "neither"]
    m_tilde: float
    m: float
    epsilon0: float
    hyp1_ok: bool
    hyp2_ok: bool
    hyp3_ok: bool
    ass2_ok: bool
    lambda_range_ok: bool
    lambda_upper_bound: float
    p_sigma: float
    p_sigma_d: float
    lambda_lower_bound: Optional[float] = None
    intro_conditions_ok: Optional[bool] = None
    monotone_a_ok: bool = True
    monotone_d_ok: bool = True
    drift_bound_ok: bool = True
    diagnostics: List[str] = Field(default_factory=list)

    @property
    def certifiable(self) -> bool:
        return self.hyp1_ok and self.hyp3_ok and self.ass2_ok and self.lambda_range_ok


class HardyConstants(FrozenModel):
    """Best Hardy-Poincare constants estimated on nested meshes"""
    c_hp: float = Field(..., gt=0.0)
    c_hp_tilde: float = Field(..., gt=0.0)
    mesh_size: int
    extrapolated: bool
    c_hp_levels: List[float] = Field(default_factory=list)
    c_hp_tilde_levels: List[float] = Field(default_factory=list)
    level_sizes: List[int] = Field(default_factory=list)
    margin: float = 0.0
    margin_tilde: float = 0.0
    gap_ratio: Optional[float] = None

    @property
    def certified_c_hp(self) -> float:
        """Safety-inflated C_HP used by every admissibility decision"""
        return self.c_hp * (1.0 + self.margin)

    @property
    def certified_c_hp_tilde(self) -> float:
        return self.c_hp_tilde * (1.0 + self.margin_tilde)


class LambdaGauge(FrozenModel):
    """epsilon, 1_eps and C_lambda for a given lambda"""
    lam: float
    epsilon: Optional[float] = None
    one_eps: float = Field(..., gt=0.0, le=1.0)
    c_lambda: float = Field(..., gt=0.0)
    c_hp_used: float


class Mesh(FrozenModel):
    """Graded mesh x_i = (i/N)^q on [0, 1]"""
    n: int = Field(..., ge=1)
    q: float = Field(..., ge=1.0)
    nodes: np.ndarray

    @classmethod
    def graded(cls, n: int, q: float) -> "Mesh":
        nodes = (np.arange(n + 1, dtype=float) / n) ** q
        nodes[0] = 0.0
        nodes[-1] = 1.0
        return cls(n=n, q=q, nodes=nodes)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def refined(self) -> "Mesh":
        """Nested mesh with twice as many elements"""
        return Mesh.graded(2 * self.n, self.q)


class SymTridiagonal(FrozenModel):
    """Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal"""
    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def quad(self, u: np.ndarray) -> float:
        """u^T M u"""
        return float(self.diag @ (u * u) + 2.0 * self.off @ (u[:-1] * u[1:]))

    def quad_rows(self, rows: np.ndarray) -> np.ndarray:
        """u^T M u for every row of a 2-D array"""
        return (rows * rows) @ self.diag + 2.0 * (rows[:, :-1] * rows[:, 1:]) @ self.off

    def bilinear_rows(self, rows: np.ndarray, other: np.ndarray) -> np.ndarray:
        return (rows * other) @ self.diag + (rows[:, :-1] * other[:, 1:] + rows[:, 1:] * other[:, :-1]) @ self.off

    def scaled(self, factor: float) -> "SymTridiagonal":
        return SymTridiagonal(diag=factor * self.diag, off=factor * self.off)

    def plus(self, other: "SymTridiagonal") -> "SymTridiagonal":
        return SymTridiagonal(diag=self.diag + other.diag, off=self.off + other.off)

    def with_corner(self, value: float) -> "SymTridiagonal":
        """Adds value to the last diagonal entry (the x = 1 node)"""
        diag = np.array(self.diag)
        diag[-1] += value
        return SymTridiagonal(diag=diag, off=self.off)

    def to_banded(self) -> np.ndarray:
        """Upper banded storage for scipy.linalg.*_banded routines"""
        ab = np.zeros((2, self.size))
        ab[0, 1:] = self.off
        ab[1, :] = self.diag
        return ab

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")


class OperatorMatrices(FrozenModel):
    """Weighted FE matrices after Dirichlet elimination of the x = 0 node

    B  = int phi_i phi_j / sigma
    K  = int eta phi_i' phi_j'
    K0 = int phi_i' phi_j'
    S  = int phi_i phi_j / (sigma d)
    """
    B: SymTridiagonal
    K: SymTridiagonal
    K0: SymTridiagonal
    S: SymTridiagonal
    mesh: Mesh
    profile: CoefficientProfile
    weights: WeightPair
    quadrature: Literal["exact", "gauss"]
    gauss_points: int = Config.GAUSS_POINTS
    p_mass: float
    p_potential: float
    dirichlet_eliminated: bool = True

    @property
    def boundary_index(self) -> int:
        """Index of the x = 1 node in the reduced system"""
        return self.K.size - 1

    def operator(self, lam: float) -> SymTridiagonal:
        """K - lambda S"""
        return self.K.plus(self.S.scaled(-lam))


class State(FrozenModel):
    """Nodal displacement and velocity, node 0 included"""
    y: np.ndarray
    v: np.ndarray
    t: float = 0.0


class SimulationSettings(FrozenModel):
    """Time grid and stepping scheme for one run"""
    dt: float = Field(Config.DEFAULT_DT, gt=0.0)
    t_final: float = Field(Config.DEFAULT_T_FINAL, ge=0.0)
    stride: int = Field(Config.DEFAULT_STRIDE, ge=1)
    scheme: Literal["midpoint", "explicit_euler"] = "midpoint"
    damped: bool = True
    store_trajectory: bool = False


class EnergyTrace(FrozenModel):
    """Recorded energy and boundary traces of one run"""
    times: np.ndarray
    energy: np.ndarray
    boundary_y: np.ndarray
    boundary_v: np.ndarray
    dissipation_residuals: np.ndarray
    dt: float
    stride: int
    e0: float
    steps: int
    max_energy_increase: float = 0.0
    lam: float
    beta_damp: float


class Trajectory(FrozenModel):
    """Nodal states at every recorded time"""
    times: np.ndarray
    y: np.ndarray
    v: np.ndarray
    matrices: OperatorMatrices
    lam: float
    beta_damp: float
    dt: float
    stride: int


class LedgerEntry(FrozenModel):
    """One checked inequality lhs < rhs (or <=) with its verdict"""
    name: str
    lhs: float
    rhs: float
    holds: bool


class SteadyState(FrozenModel):
    """Solution Z of the steady boundary problem with its norms"""
    z: np.ndarray
    gamma: float
    triple_norm_sq: float
    weighted_l2_sq: float
    residual: float
    bound_triple: Optional[float] = None
    bound_l2: Optional[float] = None
    estimates_hold: Optional[bool] = None


class DecayCertificate(FrozenModel):
    """Every constant of the exponential decay estimate"""
    theta: float
    c1: float
    c2: float
    c3: float
    c4: float
    delta: float
    delta0: float
    m_script: float
    lambda_admissible: bool
    bound_formula: str = "E(t) <= E(0) * exp(1 - t / m_script) for t >= m_script"
    lambda_hp_reading: str = Config.LAMBDA_HP_READING
    lam: float
    beta_damp: float
    k_a: float
    k_d: float
    m: float
    epsilon0: float
    c_hp: float
    c_hp_tilde: float
    one_eps: float
    c_lambda: float
    eta_min: float
    eta_max: float
    eta_at_1: float
    sigma_at_1: float
    a_at_1: float
    d_at_1: float
    hardy_extrapolated: bool
    assumption_ledger: List[LedgerEntry] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class BoundVerdict(FrozenModel):
    """Outcome of comparing a trace against E(0) e^{1 - t/M}"""
    holds: bool
    margin: float
    samples_checked: int
    m_script: float
    horizon: float


class DecayFit(FrozenModel):
    """Least-squares slope of ln E"""
    rate: float
    r_squared: float
    samples: int
    t_start: float


class IdentityReport(FrozenModel):
    """Discrete evaluation of an integral identity"""
    identity_name: str
    lhs: float
    rhs: float
    residual: float
    terms: Dict[str, float] = Field(default_factory=dict)
    refinement_trend: List[float] = Field(default_factory=list)
    levels: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class TraceBoundCheck(FrozenModel):
    """Intermediate observability and energy-integral inequalities on a run"""
    trace_bound_holds: bool
    energy_bound_holds: bool
    slacks: Dict[str, float]
    values: Dict[str, float] = Field(default_factory=dict)
