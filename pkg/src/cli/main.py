"""
Command-line entry point
check -> certify -> simulate -> verify -> diagnose -> sweep on one run file
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from pydantic import ValidationError

from config.config import Config
from src.cli.reporting import ReportWriter
from src.cli.run_config import RunConfig, RunConfigError, load_run_config, resolve_output_dir
from src.core.coefficients import load_tabulated_csv, power_law_profile
from src.core.errors import DegWaveError, HypothesisError, InadmissibleLambdaError
from src.core.models import CoefficientProfile, SimulationSettings
from src.core.certificate import verify_decay_bound
from src.core.pipeline import Laboratory, SweepRunner

logger = logging.getLogger(__name__)

MODES = ("check", "certify", "simulate", "verify", "diagnose", "sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degwave",
        description="Decay certificates and simulations for boundary-damped degenerate wave equations",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", type=Path, default=None, help="key = value run file")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="run-file entry applied on top of --config (repeatable)")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--seed", type=int, default=None, help="seed of the random Hardy check")
    return parser


def build_profile(config: RunConfig) -> CoefficientProfile:
    if config.is_tabulated:
        return load_tabulated_csv(config.tabulated.path, config.lam, config.beta_damp)
    return power_law_profile(alpha=config.a.alpha, mu=config.b.mu, beta_b=config.b.beta,
                             gamma_d=config.d.gamma, lam=config.lam, beta_damp=config.beta_damp)


def build_settings(config: RunConfig) -> SimulationSettings:
    return SimulationSettings(dt=config.time.dt, t_final=config.time.t_final, stride=config.time.stride,
                              scheme=config.time.scheme, damped=config.time.damped)


def execute(config: RunConfig, out_dir: Path) -> int:
    """Runs the configured mode and writes its artifacts; returns the exit code"""
    writer = ReportWriter(out_dir, config)
    try:
        # Step 1: Profile and discretization
        profile = build_profile(config)
        lab = Laboratory(profile, n=config.mesh.n, q=config.mesh.q,
                         refine_levels=config.hardy.levels, path=config.quadrature.path,
                         points=config.quadrature.points)
        settings = build_settings(config)
        logger.info(f"Mode {config.mode}: {profile.kind.value} profile, N = {config.mesh.n}")

        # Step 2: Mode
        if config.mode == "check":
            report = lab.check()
            validation = lab.hardy_validation(config.seed)
            writer.write_json("check.json", writer.check_payload(profile, report, lab.hardy, validation))
            if not (report.hyp1_ok and report.hyp3_ok and report.ass2_ok):
                return Config.EXIT_HYPOTHESIS
            if not report.lambda_range_ok:
                return Config.EXIT_LAMBDA
            return Config.EXIT_OK

        if config.mode == "certify":
            gauge, cert = lab.certify(config.certificate.optimize_delta)
            print(json.dumps(writer.constants_fragment(lab.hardy, gauge), sort_keys=True))
            writer.write_json("certificate.json", writer.certify_payload(lab.hardy, gauge, cert))
            return Config.EXIT_OK

        if config.mode == "simulate":
            _, trace = lab.simulate(settings, config.initial.displacement, config.initial.velocity)
            writer.write_trace_csv(trace)
            return Config.EXIT_OK

        if config.mode == "verify":
            cert, trace, verdict, fit = lab.verify(settings, config.initial.displacement,
                                                   config.initial.velocity,
                                                   config.certificate.optimize_delta)
            control = verify_decay_bound(trace, cert, m_script=cert.m_script / 100.0)
            writer.write_trace_csv(trace)
            writer.write_json("verdict.json", writer.verdict_payload(cert, trace, verdict, fit, control))
            return Config.EXIT_OK if verdict.holds else Config.EXIT_NUMERICAL

        if config.mode == "diagnose":
            reports = lab.diagnose(settings, config.diagnose.s, config.diagnose.t,
                                   config.diagnose.displacement)
            writer.write_json("diagnostics.json", writer.identity_payload(reports))
            return Config.EXIT_OK

        runner = SweepRunner(lab, config.sweep.parameter, settings, config.initial.displacement,
                             config.sweep.relative, config.sweep.workers)
        rows = runner.run(config.sweep_values())
        writer.write_sweep_csv(rows)
        return Config.EXIT_OK

    except (HypothesisError, InadmissibleLambdaError) as exc:
        logger.error(f"Refused: {exc}")
        writer.write_json("refusal.json", writer.refusal_payload(exc))
        return exc.exit_code
    except DegWaveError as exc:
        logger.error(f"Numerical failure: {exc}", exc_info=True)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        logger.error(f"Usage error: {exc}")
        return Config.EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return Config.EXIT_OK if exc.code == 0 else Config.EXIT_USAGE

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        config = load_run_config(args.config, overrides, args.mode)
        out_dir = resolve_output_dir(args.out, config)
    except (ValidationError, RunConfigError) as exc:
        logger.error(f"Invalid run configuration: {exc}")
        return Config.EXIT_USAGE

    return execute(config, out_dir)


if __name__ == "__main__":
    sys.exit(main())
