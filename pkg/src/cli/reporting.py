"""
Report writer
Renders laboratory results into the JSON and CSV artifacts of a run
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.config import Config
from src.core.errors import DegWaveError, HypothesisError, InadmissibleLambdaError
from src.core.models import (
    BoundVerdict, CoefficientProfile, DecayCertificate, DecayFit, DegeneracyReport,
    EnergyTrace, HardyConstants, IdentityReport, LambdaGauge
)
from src.cli.run_config import RunConfig

logger = logging.getLogger(__name__)


def _dump(model) -> Optional[Dict[str, Any]]:
    if model is None:
        return None
    return model.model_dump(mode="json")


class ReportWriter:
    """Writes artifacts into one output directory"""

    def __init__(self, out_dir: Path, config: RunConfig):
        """
        Initialize writer

        Args:
            out_dir: Directory for every artifact of the run (created on demand)
            config: Validated run configuration, echoed into JSON metadata
        """
        self.out_dir = Path(out_dir)
        self.config = config

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def metadata(self) -> Dict[str, Any]:
        return {
            "run_config": self.config.model_dump(mode="json", by_alias=True),
            "tolerances": Config.get_config(),
        }

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=True)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path

    def write_trace_csv(self, trace: EnergyTrace, name: str = "trace.csv") -> Path:
        """Columns t, E, y(t,1), y_t(t,1), dissipation residual"""
        path = self._path(name)
        table = np.column_stack([trace.times, trace.energy, trace.boundary_y,
                                 trace.boundary_v, trace.dissipation_residuals])
        np.savetxt(path, table, fmt=Config.CSV_FLOAT_FORMAT, delimiter=",",
                   header=Config.TRACE_HEADER, comments="")
        logger.info(f"Wrote {path} ({table.shape[0]} samples)")
        return path

    def write_sweep_csv(self, rows: Sequence[Tuple[float, float, float, bool]],
                        name: str = "sweep.csv") -> Path:
        path = self._path(name)
        table = np.array([[value, inv_m, rate, float(holds)] for value, inv_m, rate, holds in rows],
                         dtype=float).reshape(-1, 4)
        np.savetxt(path, table, fmt=Config.CSV_FLOAT_FORMAT, delimiter=",",
                   header=Config.SWEEP_HEADER, comments="")
        logger.info(f"Wrote {path} ({len(rows)} rows)")
        return path

    # Payloads

    def check_payload(self, profile: CoefficientProfile, report: DegeneracyReport,
                      hardy: HardyConstants, validation: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "profile": _dump(profile),
            "degeneracy_report": _dump(report),
            "hardy_constants": _dump(hardy),
            "hardy_validation": validation,
            "metadata": self.metadata(),
        }

    @staticmethod
    def constants_fragment(hardy: HardyConstants, gauge: LambdaGauge) -> Dict[str, Any]:
        """The Hardy / gauge fragment printed by certify"""
        return {
            "c_hp": hardy.c_hp,
            "c_hp_tilde": hardy.c_hp_tilde,
            "c_hp_certified": hardy.certified_c_hp,
            "c_hp_tilde_certified": hardy.certified_c_hp_tilde,
            "epsilon": gauge.epsilon,
            "one_eps": gauge.one_eps,
            "c_lambda": gauge.c_lambda,
            "refinement_levels": hardy.level_sizes,
            "extrapolated": hardy.extrapolated,
        }

    def certify_payload(self, hardy: HardyConstants, gauge: LambdaGauge,
                        cert: DecayCertificate) -> Dict[str, Any]:
        payload = self.constants_fragment(hardy, gauge)
        payload.update({
            "hardy_constants": _dump(hardy),
            "certificate": _dump(cert),
            "metadata": self.metadata(),
        })
        return payload

    def verdict_payload(self, cert: DecayCertificate, trace: EnergyTrace, verdict: BoundVerdict,
                        fit: Optional[DecayFit], negative_control: BoundVerdict) -> Dict[str, Any]:
        return {
            "verdict": _dump(verdict),
            "negative_control": _dump(negative_control),
            "fit": _dump(fit),
            "certificate": _dump(cert),
            "trace": {
                "e0": trace.e0,
                "e_final": float(trace.energy[-1]),
                "steps": trace.steps,
                "dt": trace.dt,
                "max_dissipation_residual": float(np.max(trace.dissipation_residuals)),
            },
            "metadata": self.metadata(),
        }

    def identity_payload(self, reports: List[IdentityReport]) -> List[Dict[str, Any]]:
        return [_dump(report) for report in reports]

    @staticmethod
    def refusal_payload(exc: DegWaveError) -> Dict[str, Any]:
        """Names the violated inequality with both sides"""
        payload: Dict[str, Any] = {
            "error": type(exc).__name__,
            "exit_code": exc.exit_code,
            "message": str(exc),
        }
        if isinstance(exc, InadmissibleLambdaError):
            payload.update({"inequality": exc.inequality, "lhs": exc.lhs, "rhs": exc.rhs})
        if isinstance(exc, HypothesisError):
            payload["violations"] = exc.violations
        return payload
