"""
Configuration settings for the degenerate wave stabilization laboratory
"""

from typing import Dict, Any


class Config:
    """Numerical tolerances and defaults for every pipeline stage"""

    # Degeneracy exponents K_g = sup x|g'|/g
    DEGENERACY_REL_TOL = 1e-6  # sup considered stable when refinement changes it less than this
    DERIVATIVE_REL_STEP = 1e-6  # central difference step h = 1e-6 * x for tabulated profiles
    GEOMETRIC_GRID_DEPTH = 52  # x_j = 2^-j, j = 0..52
    UNIFORM_FILL = 1024  # uniform points added to the geometric grid
    MAX_SUP_REFINEMENTS = 8  # doublings of the uniform fill before giving up
    DRIFT_BOUND_LIMIT = 1e8  # |x b / a| above this on the grid counts as unbounded

    # Feller weight eta
    ETA_ABS_TOL = 1e-10  # absolute tolerance of the adaptive quadrature of b/a
    ETA_REL_TOL = 1e-12
    ETA_UNIFORM_ANCHORS = 16  # uniform anchors on top of the geometric ones

    # Mesh and assembly
    MIN_ELEMENTS = 8
    MAX_GRADING = 4.0
    GAUSS_POINTS = 4  # product-integration nodes per element
    SHIFTED_MOMENT_POINTS = 12  # Gauss-Legendre points for smooth shifted moments
    SHIFTED_MOMENT_SWITCH = 1.0  # h / x_l above this uses the binomial expansion

    # Hardy-Poincare constants
    EIGEN_MAX_ITER = 500
    EIGEN_TOL = 1e-10  # relative change of the Rayleigh quotient
    EXTRAPOLATION_AGREEMENT = 1e-4  # two finest levels agreeing within this -> extrapolated
    SAFETY_MARGIN_FACTOR = 3.0  # margin = 3 * last increment / value
    DEFAULT_REFINE_LEVELS = 3

    # Time integration
    DEFAULT_ELEMENTS = 256
    DEFAULT_DT = 1e-3
    DEFAULT_T_FINAL = 20.0
    DEFAULT_STRIDE = 1
    SOLVER_TOL = 1e-10  # linear-solver contract used by residual checks
    MONOTONICITY_TOL = 1e-10  # E_{n+1} <= E_n + tol * E_0

    # Decay certificate
    DECAY_BOUND_SLACK = 1e-8  # multiplicative slack on E(0) e^{1 - t/M}
    MIN_FIT_SAMPLES = 10
    ENERGY_FLOOR = 1e-300  # samples below are excluded from the log fit
    DELTA_GRID_POINTS = 64
    VERIFY_HORIZON_FACTOR = 3.0  # verify runs to max(t_final, 3 M)

    # Diagnostics
    DIAGNOSTIC_S = 0.5
    DIAGNOSTIC_T = 2.0

    # Output
    CSV_FLOAT_FORMAT = "%.17g"
    TRACE_HEADER = "t,E,y1,v1,diss_residual"
    SWEEP_HEADER = "value,inv_m_script,fitted_rate,bound_holds"
    OUTPUT_DIR_ENV = "DEGWAVE_OUTPUT_DIR"
    DEFAULT_OUTPUT_DIR = "output"
    LAMBDA_HP_READING = "lambda*C_HP"

    # Exit codes
    EXIT_OK = 0
    EXIT_USAGE = 1
    EXIT_HYPOTHESIS = 2
    EXIT_LAMBDA = 3
    EXIT_NUMERICAL = 4

    @classmethod
    def get_config(cls) -> Dict[str, Any]:
        """Get all configuration as dictionary"""
        return {
            key: value for key, value in cls.__dict__.items()
            if not key.startswith('_') and not callable(value) and not isinstance(value, classmethod)
        }
