"""
Run configuration
Parses the dotted key = value run file and validates it into a RunConfig
"""

import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.config import Config

Mode = Literal["check", "certify", "simulate", "verify", "diagnose", "sweep"]


class RunConfigError(ValueError):
    """Unreadable run file or malformed override"""


class Section(BaseModel):
    """Strict section: unknown keys and non-finite numbers are rejected"""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True)


class LeadingSection(Section):
    alpha: Optional[float] = Field(None, gt=0.0, description="a = x^alpha")


class DriftSection(Section):
    mu: float = 0.0
    beta: float = Field(1.0, description="b = mu x^beta")


class SingularSection(Section):
    gamma: Optional[float] = Field(None, gt=0.0, description="d = x^gamma")


class TabulatedSection(Section):
    path: Optional[Path] = Field(None, description="CSV with header x,a,b,d")


class MeshSection(Section):
    n: int = Field(Config.DEFAULT_ELEMENTS, ge=Config.MIN_ELEMENTS)
    q: Optional[float] = Field(None, ge=1.0, le=Config.MAX_GRADING)


class QuadratureSection(Section):
    points: int = Field(Config.GAUSS_POINTS, ge=1, le=12)
    path: Literal["auto", "exact", "gauss"] = "auto"


class TimeSection(Section):
    dt: float = Field(Config.DEFAULT_DT, gt=0.0)
    t_final: float = Field(Config.DEFAULT_T_FINAL, ge=0.0)
    stride: int = Field(Config.DEFAULT_STRIDE, ge=1)
    scheme: Literal["midpoint", "explicit_euler"] = "midpoint"
    damped: bool = True


class SweepSection(Section):
    parameter: Literal["lambda", "beta_damp", "alpha", "mu", "gamma_d"] = "lambda"
    start: float = 0.0
    stop: float = 0.9
    count: int = Field(16, ge=1)
    relative: bool = False
    workers: Optional[int] = Field(None, ge=1)


class OutputSection(Section):
    dir: Optional[Path] = None


class HardySection(Section):
    levels: int = Field(Config.DEFAULT_REFINE_LEVELS, ge=2)


class CertificateSection(Section):
    optimize_delta: bool = False


class DiagnoseSection(Section):
    s: float = Field(Config.DIAGNOSTIC_S, ge=0.0)
    t: float = Field(Config.DIAGNOSTIC_T, gt=0.0)
    displacement: str = "pulse"


class InitialSection(Section):
    displacement: str = "bump"
    velocity: str = "still"


class RunConfig(Section):
    """Validated run file; sections mirror the dotted key prefixes"""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True, populate_by_name=True)

    mode: Mode = "check"
    lam: float = Field(0.0, alias="lambda")
    beta_damp: float = Field(0.0, ge=0.0)
    seed: int = 0

    a: LeadingSection = Field(default_factory=LeadingSection)
    b: DriftSection = Field(default_factory=DriftSection)
    d: SingularSection = Field(default_factory=SingularSection)
    tabulated: TabulatedSection = Field(default_factory=TabulatedSection)
    mesh: MeshSection = Field(default_factory=MeshSection)
    quadrature: QuadratureSection = Field(default_factory=QuadratureSection)
    time: TimeSection = Field(default_factory=TimeSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)
    hardy: HardySection = Field(default_factory=HardySection)
    certificate: CertificateSection = Field(default_factory=CertificateSection)
    diagnose: DiagnoseSection = Field(default_factory=DiagnoseSection)
    initial: InitialSection = Field(default_factory=InitialSection)

    @model_validator(mode="after")
    def _one_profile(self) -> "RunConfig":
        power_law = self.a.alpha is not None or self.d.gamma is not None
        if self.tabulated.path is not None:
            if power_law:
                raise ValueError("give either tabulated.path or a.alpha / d.gamma, not both")
            return self
        if self.a.alpha is None or self.d.gamma is None:
            raise ValueError("a power-law profile needs both a.alpha and d.gamma")
        return self

    @property
    def is_tabulated(self) -> bool:
        return self.tabulated.path is not None

    def sweep_values(self) -> List[float]:
        sweep = self.sweep
        if sweep.count == 1:
            return [sweep.start]
        step = (sweep.stop - sweep.start) / (sweep.count - 1)
        return [sweep.start + k * step for k in range(sweep.count)]


def parse_overrides(overrides: Sequence[str]) -> Dict[str, str]:
    parsed = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise RunConfigError(f"override must look like key=value, got {item!r}")
        parsed[key.strip()] = value.strip()
    return parsed


def fold_sections(flat: Dict[str, Optional[str]]) -> Dict[str, object]:
    """{"mesh.n": "64", "lambda": "0.1"} -> {"mesh": {"n": "64"}, "lambda": "0.1"}

    Empty values are dropped so that the defaults apply.
    """
    nested: Dict[str, object] = {}
    for key, value in flat.items():
        if value is None or value == "":
            continue
        parts = key.split(".")
        if len(parts) == 1:
            nested[key] = value
        elif len(parts) == 2:
            section = nested.setdefault(parts[0], {})
            if not isinstance(section, dict):
                raise RunConfigError(f"key {parts[0]!r} is used both as a value and as a section")
            section[parts[1]] = value
        else:
            raise RunConfigError(f"keys have at most one dot, got {key!r}")
    return nested


def load_run_config(path: Optional[Path] = None,
                    overrides: Sequence[str] = (),
                    mode: Optional[str] = None) -> RunConfig:
    """Run file, then overrides, then the subcommand; raises ValidationError on bad values"""
    flat: Dict[str, Optional[str]] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise RunConfigError(f"run file {str(path)!r} does not exist")
        flat.update(dotenv_values(path, interpolate=False))
    flat.update(parse_overrides(overrides))
    if mode is not None:
        flat["mode"] = mode
    return RunConfig.model_validate(fold_sections(flat))


def resolve_output_dir(cli_out: Optional[Path], config: RunConfig) -> Path:
    """--out, then output.dir, then DEGWAVE_OUTPUT_DIR, then ./output"""
    if cli_out is not None:
        return Path(cli_out)
    if config.output.dir is not None:
        return config.output.dir
    load_dotenv()
    env_dir = os.getenv(Config.OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir)
    return Path(Config.DEFAULT_OUTPUT_DIR)
