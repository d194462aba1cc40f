#!/usr/bin/env python3
"""
AngleSage command line: gradient checks, Tammes solves, calibration of prediction logs and
simulator experiments. Every command writes its artifacts plus a manifest.json to --out.

Exit codes: 0 success, 1 gate or runtime failure, 2 usage / config / input error.
"""
import argparse
import math
import sys
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from services import __version__
from services.calibration import (
    DEFAULT_BINS,
    compute_ece,
    confidence_histogram,
    read_prediction_log,
    reliability_data,
    render_reliability_svg,
    write_prediction_log,
)
from services.cli.manifest import ArtifactWriter, dumps, hash_bytes, hash_config, portable_argv
from services.config import Settings
from services.errors import AngleSageError, ConfigError, EmptyLog, MalformedLog
from services.geometry.feature_io import save_features
from services.gradcheck import gradnorm_curve, law_sweep, sweep_gradients
from services.logging_config import configure_logging
from services.objectives.dispersion import Regularizer
from services.optimizer import OptimizerConfig, solve_tammes, TAMMES_OPTIMIZER
from services.oracle import analytic_cases, brute_force_circle, cases_frame, lookup_case
from services.simulator import (
    DEFAULT_LAMBDAS,
    DESK_REGIMES,
    SimConfig,
    generate_world,
    pareto_sweep,
    regime_claims_over_seeds,
    regime_experiment,
    run_episode,
)
logger = structlog.get_logger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
TAMMES_TOLERANCE_DEG = 1.0
COSINE_LAW_TOL = 1e-8
ANGULAR_LAW_TOL = 1e-6
CURVE_TOL = 1e-9


class GradCheckConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_seeds: int = Field(default=50, ge=1)
    n_values: List[int] = [3, 8, 20]
    d_values: List[int] = [2, 16, 64]
    objectives: List[Regularizer] = [
        Regularizer.ANGULAR_DIVERSITY,
        Regularizer.ORTHOGONALITY,
        Regularizer.ATFD,
    ]
    threshold: float = Field(default=1e-4, gt=0.0)
    abs_floor: float = Field(default=1e-7, ge=0.0)
    step: float = Field(default=1e-5, ge=1e-8, le=1e-2)
    law_pairs: int = Field(default=1000, ge=1)
    law_dim: int = Field(default=8, ge=2)
    curve_degrees: List[float] = [float(a) for a in range(5, 180, 5)]

    @field_validator("objectives")
    @classmethod
    def _differentiable_only(cls, value: List[Regularizer]) -> List[Regularizer]:
        if Regularizer.NONE in value:
            raise ValueError("'none' has no gradient to check")
        return value

    @field_validator("n_values")
    @classmethod
    def _at_least_two(cls, value: List[int]) -> List[int]:
        if any(n < 2 for n in value):
            raise ValueError("every N must be >= 2")
        return value


class SimulateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["episode", "regime", "pareto"] = "episode"
    sim: SimConfig = SimConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    regimes: List[Tuple[int, int]] = list(DESK_REGIMES)
    lambdas: List[float] = list(DEFAULT_LAMBDAS)
    claim_seeds: List[int] = []


def _load_config(path: Optional[str], model):
    """(resolved config, hash of the file bytes or of the defaults)"""
    if path is None:
        config = model()
        return config, hash_config(config)
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"config file not found: {config_path}")
    raw = config_path.read_bytes()
    return model.model_validate_json(raw), hash_bytes(raw)


def _out_dir(args, command: str) -> Path:
    return Path(args.out) if args.out else Settings.from_env().out_dir / command


def _emit(args, payload, frame: Optional[pd.DataFrame] = None) -> None:
    """Machine-readable stdout when --format is given"""
    if args.format == "json":
        sys.stdout.write(dumps(payload))
    elif args.format == "csv" and frame is not None:
        frame.to_csv(sys.stdout, index=False)


# ---------------------------------------------------------------- gradcheck

def cmd_gradcheck(args) -> int:
    cfg, config_hash = _load_config(args.config, GradCheckConfig)
    seed = args.seed if args.seed is not None else 0
    writer = ArtifactWriter(_out_dir(args, "gradcheck"))

    sweeps = sweep_gradients(
        range(seed, seed + cfg.n_seeds),
        n_values=cfg.n_values,
        d_values=cfg.d_values,
        objectives=[o.value for o in cfg.objectives],
        threshold=cfg.threshold,
        abs_floor=cfg.abs_floor,
        step=cfg.step,
    )
    laws = law_sweep(cfg.law_pairs, cfg.law_dim, seed=seed)
    laws_passed = (
        laws.max_cosine_rel_error <= COSINE_LAW_TOL
        and laws.max_angular_rel_error <= ANGULAR_LAW_TOL
        and laws.angular_norm_std <= ANGULAR_LAW_TOL
    )

    curve = gradnorm_curve(np.radians(cfg.curve_degrees))
    curve_passed = bool(
        np.all(np.abs(curve["cosine_gradnorm"] - np.sin(curve["theta_radians"])) <= CURVE_TOL)
        and np.all(np.abs(curve["angular_gradnorm"] - 1.0) <= CURVE_TOL)
    )

    passed = all(s.passed for s in sweeps) and laws_passed and curve_passed
    report = {
        "passed": passed,
        "objectives": [{**s.model_dump(mode="json"), "passed": s.passed} for s in sweeps],
        "gradnorm_laws": {**laws.model_dump(mode="json"), "passed": laws_passed},
        "gradnorm_curve_passed": curve_passed,
    }
    writer.json("gradcheck.json", report)
    writer.csv("gradnorm_curve.csv", curve, float_format="%.6f")
    writer.manifest("gradcheck", config_hash, seed, portable_argv(args.argv))

    if args.format:
        _emit(args, report, curve)
    else:
        for s in sweeps:
            mark = "✅" if s.passed else "❌"
            print(f"{mark} {s.objective}: checked {s.checked}, skipped {s.skipped}, "
                  f"max rel error {s.max_rel_error:.3g}")
        print(f"{'✅' if laws_passed else '❌'} gradient-norm laws over {laws.n_pairs} pairs")
        print(f"{'✅' if curve_passed else '❌'} gradient-norm curve ({len(curve)} angles)")
    return EXIT_OK if passed else EXIT_FAILED


# ---------------------------------------------------------------- tammes

def cmd_tammes(args) -> int:
    if args.n < 2 or args.d < 2:
        raise ConfigError(f"tammes needs n >= 2 and d >= 2, got n={args.n}, d={args.d}")
    seed = args.seed if args.seed is not None else 0
    cfg = OptimizerConfig(**{
        **TAMMES_OPTIMIZER.model_dump(),
        "seed": seed,
        "steps": args.steps if args.steps is not None else TAMMES_OPTIMIZER.steps,
        "learning_rate": args.lr if args.lr is not None else TAMMES_OPTIMIZER.learning_rate,
    })
    config_hash = hash_config({"n": args.n, "d": args.d, "restarts": args.restarts, **cfg.model_dump()})
    writer = ArtifactWriter(_out_dir(args, "tammes"))

    solution = solve_tammes(args.n, args.d, cfg, restarts=args.restarts)
    case = lookup_case(args.n, args.d)
    achieved_deg = math.degrees(solution.min_angle)

    if case is None:
        status, within = "UNVERIFIED", None
    else:
        tolerance = math.radians(TAMMES_TOLERANCE_DEG)
        within = sum(abs(a - case.optimal_min_angle) <= tolerance for a in solution.restart_angles)
        status = "PASS" if abs(solution.min_angle - case.optimal_min_angle) <= tolerance else "FAIL"

    summary = {
        "n": args.n,
        "d": args.d,
        "status": status,
        "achieved_min_angle_radians": solution.min_angle,
        "achieved_min_angle_degrees": achieved_deg,
        "optimal_min_angle_radians": case.optimal_min_angle if case else None,
        "optimal_min_angle_degrees": case.degrees if case else None,
        "restarts": args.restarts,
        "restarts_within_tolerance": within,
    }
    restarts = pd.DataFrame(
        [{"restart": i, "seed": r.seed, "min_angle_radians": r.min_angle,
          "min_angle_degrees": math.degrees(r.min_angle)} for i, r in enumerate(solution.restarts)],
        columns=["restart", "seed", "min_angle_radians", "min_angle_degrees"],
    )
    oracle = list(analytic_cases()) + [brute_force_circle(n) for n in range(2, 9)]

    writer.json("tammes.json", summary)
    writer.csv("tammes.csv", restarts)
    writer.csv("oracle_cases.csv", cases_frame(oracle), float_format="%.17g")
    save_features(solution.features, writer.path("features.csv"))
    writer.manifest("tammes", config_hash, seed, portable_argv(args.argv))

    if args.format:
        _emit(args, summary, restarts)
    else:
        mark = {"PASS": "✅", "FAIL": "❌", "UNVERIFIED": "⚠️"}[status]
        optimal = f" (optimal {case.degrees:.4f}°)" if case else ""
        print(f"{mark} n={args.n} d={args.d}: min angle {achieved_deg:.4f}°{optimal} {status}")
    return EXIT_FAILED if status == "FAIL" else EXIT_OK


# ---------------------------------------------------------------- calibrate

def cmd_calibrate(args) -> int:
    log_path = Path(args.log)
    records = read_prediction_log(log_path)
    if not records:
        raise EmptyLog(f"{log_path} holds a header but no records")

    bins = args.bins
    report = compute_ece(records, n_bins=bins)
    config_hash = hash_bytes(log_path.read_bytes() + f"|bins={bins}".encode("utf-8"))
    writer = ArtifactWriter(_out_dir(args, "calibrate"))

    table = reliability_data(report)
    writer.json("calibration.json", report)
    writer.csv("reliability.csv", table)
    writer.csv("histogram.csv", confidence_histogram(report))
    writer.text("reliability.svg", render_reliability_svg(report))
    writer.manifest("calibrate", config_hash, args.seed or 0, portable_argv(args.argv))

    if args.format:
        _emit(args, report, table)
    else:
        print(f"✅ {len(records)} records, accuracy {100 * report.accuracy:.2f}%")
        print(f"ECE {100 * report.ece:.2f}%  SCE {100 * report.sce:.2f}%  MCE {100 * report.mce:.2f}%")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    cfg, config_hash = _load_config(args.config, SimulateConfig)
    sim = cfg.sim if args.seed is None else cfg.sim.model_copy(update={"master_seed": args.seed})
    workers = args.workers or Settings.from_env().workers
    writer = ArtifactWriter(_out_dir(args, "simulate"))

    if cfg.mode == "episode":
        result = run_episode(generate_world(sim), sim, cfg.optimizer, n_bins=args.bins, workers=workers)
        payload = result
        table = reliability_data(result.calibration)
        writer.json("result.json", result)
        writer.csv("reliability.csv", table)
        write_prediction_log(result.records, writer.path("predictions.csv"))
        summary = (f"accuracy {100 * result.accuracy:.2f}%, ECE {100 * result.calibration.ece:.2f}%, "
                   f"mean min angle {math.degrees(result.mean_min_angle):.3f}°")
    elif cfg.mode == "regime":
        table = regime_experiment(cfg.regimes, sim, cfg.optimizer, n_bins=args.bins, workers=workers)
        writer.csv("regime.csv", table)
        payload = {"regime": table.to_dict(orient="records")}
        if cfg.claim_seeds:
            claims = regime_claims_over_seeds(cfg.claim_seeds, cfg.regimes, sim, cfg.optimizer,
                                              n_bins=args.bins, workers=workers)
            writer.csv("regime_claims.csv", claims)
            payload["claims"] = claims.to_dict(orient="records")
        summary = f"{len(table)} regime rows"
    else:
        table = pareto_sweep(cfg.lambdas, generate_world(sim), sim, cfg.optimizer, n_bins=args.bins, workers=workers)
        writer.csv("pareto.csv", table)
        payload = {"pareto": table.to_dict(orient="records")}
        summary = f"{len(table)} lambda values"

    writer.manifest("simulate", config_hash, sim.master_seed, portable_argv(args.argv))

    if args.format:
        _emit(args, payload, table)
    else:
        print(f"✅ simulate/{cfg.mode}: {summary}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anglesage",
        description="Hyperspherical dispersion objectives, calibration and test-time tuning experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, help="Master seed (overrides config files)")
    parser.add_argument("--out", help="Output directory (default: $ANGLESAGE_OUT_DIR/<command>)")
    parser.add_argument("--bins", type=int, default=DEFAULT_BINS, help="Calibration bins (default 15)")
    parser.add_argument("--format", choices=["json", "csv"], help="Machine-readable output on stdout")
    parser.add_argument("--workers", type=int, help="Episode worker threads (default $ANGLESAGE_WORKERS)")
    parser.add_argument("--log-level", help="Override $ANGLESAGE_LOG_LEVEL")

    sub = parser.add_subparsers(dest="command", required=True)

    gradcheck = sub.add_parser("gradcheck", help="Finite-difference and gradient-norm law checks")
    gradcheck.add_argument("--config", help="GradCheckConfig JSON file")
    gradcheck.set_defaults(handler=cmd_gradcheck)

    tammes = sub.add_parser("tammes", help="Multi-start best-packing solve vs the oracle")
    tammes.add_argument("--n", type=int, required=True, help="Number of points")
    tammes.add_argument("--d", type=int, required=True, help="Ambient dimension")
    tammes.add_argument("--restarts", type=int, default=10)
    tammes.add_argument("--steps", type=int, help="Optimizer steps per restart (default 2000)")
    tammes.add_argument("--lr", type=float, help="Learning rate (default 1e-2)")
    tammes.set_defaults(handler=cmd_tammes)

    calibrate = sub.add_parser("calibrate", help="ECE/SCE and reliability diagram of a prediction log")
    calibrate.add_argument("log", help="CSV with header true_class,p_0,...,p_{K-1}")
    calibrate.set_defaults(handler=cmd_calibrate)

    simulate = sub.add_parser("simulate", help="Synthetic zero-shot episode, regime or Pareto experiment")
    simulate.add_argument("--config", help="SimulateConfig JSON file")
    simulate.set_defaults(handler=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv

    settings = Settings.from_env()
    configure_logging(args.log_level or settings.log_level, settings.log_format)

    if args.bins < 1:
        print("❌ --bins must be >= 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except (ConfigError, MalformedLog, EmptyLog, FileNotFoundError, ValidationError) as e:
        logger.error("usage error", command=args.command, error=str(e))
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except AngleSageError as e:
        logger.error("run failed", command=args.command, error=str(e))
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
