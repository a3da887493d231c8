"""
Exception hierarchy for the degenerate wave laboratory
Every error carries the process exit code the CLI reports for it
"""

from typing import List, Optional

from config.config import Config


class DegWaveError(Exception):
    """Base class for all laboratory errors"""
    exit_code = Config.EXIT_NUMERICAL


class InvalidCoefficientError(DegWaveError):
    """Coefficient profile violates a(0)=d(0)=0, positivity or finiteness"""


class IntegrabilityError(DegWaveError):
    """An integral that must converge (b/a, singular moments) does not"""


class HypothesisError(DegWaveError):
    """Standing hypotheses fail; the certificate is refused"""
    exit_code = Config.EXIT_HYPOTHESIS

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = violations or []


class InadmissibleLambdaError(DegWaveError):
    """lambda outside the admissible range; carries both sides of the inequality"""
    exit_code = Config.EXIT_LAMBDA

    def __init__(self, inequality: str, lhs: float, rhs: float):
        super().__init__(f"{inequality} violated: lhs = {lhs!r}, rhs = {rhs!r}")
        self.inequality = inequality
        self.lhs = lhs
        self.rhs = rhs


class SpectralError(DegWaveError):
    """Generalized eigenproblem is not positive definite"""


class ConvergenceError(DegWaveError):
    """Iterative procedure did not converge"""


class AssemblyError(DegWaveError):
    """Finite element assembly produced non-finite or indefinite matrices"""


class SolverError(DegWaveError):
    """Linear solve failed (coercivity lost numerically)"""


class StepError(DegWaveError):
    """Time step failed"""


class InvalidInitialDataError(DegWaveError):
    """Initial data violate the Dirichlet condition at the degenerate end"""


class InsufficientHorizonError(DegWaveError):
    """Trace too short for the requested check"""

    def __init__(self, message: str, required: float):
        super().__init__(message)
        self.required = required


class FitError(DegWaveError):
    """Not enough usable samples for the decay fit"""


class UnsupportedProfileError(DegWaveError):
    """Operation not available for this profile or trajectory"""
