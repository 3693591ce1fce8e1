"""
Command-line interface.

    flow-pose-tracker generate OUTPUT [--frames N] [--seed S] ...
    flow-pose-tracker track SEQUENCE... [--config FILE] [--set key=value] [--no-mask-sync] ...
    flow-pose-tracker evaluate --estimates CSV --ground-truth CSV --mesh OBJ
    flow-pose-tracker ablate SEQUENCE [--config FILE]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 1 any other tracker error.
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import yaml

from .backends import REPORT_WRITERS, get_report_writer
from .errors import (
    ConfigError, DataError, DimensionMismatchError, MissingFlowError, NumericalError, TrackerError,
)
from .io.config import ABLATIONS, load_run_config
from .metrics.report import EvalReport
from .pipeline import (
    OBJECTS, ablate_sequence, evaluate_baseline, evaluate_files, generate_sequence, object_mesh,
    track_sequences,
)
from .simulation.scene import default_intrinsics, default_trajectory
from .simulation.trajectory import CorruptionSpec, Trajectory, trajectory_from_dict

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Single-flag ablation switches of track and their config overrides.
SWITCH_FLAGS = {
    "no_mask_sync": "ablation.use_mask_sync=false",
    "no_pose_sync": "ablation.use_pose_sync=false",
    "no_outlier_rejection": "ablation.use_outlier_rejection=false",
    "no_velocity": "ablation.use_velocity=false",
    "no_pose": "ablation.use_pose=false",
}


def exit_code(error: TrackerError) -> int:
    if isinstance(error, ConfigError):
        return 2
    if isinstance(error, (DataError, DimensionMismatchError, MissingFlowError)):
        return 3
    if isinstance(error, NumericalError):
        return 4
    return 1


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML file overriding the default configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one configuration key, e.g. pose_filter.gamma=0.03")


def _add_report_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", default="table", choices=sorted(REPORT_WRITERS),
                        help="Report format")
    parser.add_argument("--report", help="Write the report to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flow-pose-tracker",
        description="6D object pose and velocity tracking from optical flow, delayed masks and delayed poses",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Simulate a sequence with ground truth")
    generate.add_argument("output", help="Sequence directory to create")
    generate.add_argument("--frames", type=int, default=150)
    generate.add_argument("--fps", type=float, default=30.0)
    generate.add_argument("--width", type=int, default=640)
    generate.add_argument("--height", type=int, default=480)
    generate.add_argument("--focal", type=float, default=600.0, help="Focal length (px)")
    generate.add_argument("--object", default="box", help=f"One of {sorted(OBJECTS)} or a mesh file")
    generate.add_argument("--trajectory", help="YAML trajectory: initial_pose and segments, or keyframes")
    generate.add_argument("--depth", type=float, default=0.8, help="Initial object depth (m)")
    generate.add_argument("--speed", type=float, default=0.3, help="Linear speed (m/s)")
    generate.add_argument("--angular-speed", type=float, default=90.0, help="Angular speed (deg/s)")
    generate.add_argument("--approach", type=float, default=0.0, help="Speed along the optical axis (m/s)")
    generate.add_argument("--mask-delay", type=int, default=6)
    generate.add_argument("--pose-delay", type=int, default=6)
    generate.add_argument("--pose-noise-t", type=float, default=0.0, help="Pose translation noise (m)")
    generate.add_argument("--pose-noise-rot", type=float, default=0.0, help="Pose rotation noise (deg)")
    generate.add_argument("--outlier-rate", type=float, default=0.0)
    generate.add_argument("--flow-noise", type=float, default=0.0, help="Flow noise (px)")
    generate.add_argument("--depth-noise", type=float, default=0.0, help="Depth noise (m)")
    generate.add_argument("--mask-miss-rate", type=float, default=0.0)
    generate.add_argument("--background-depth", type=float, help="Depth of a background plane (m)")
    generate.add_argument("--no-ground-truth", action="store_true",
                          help="Omit ground_truth.csv, as for a live recording")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--overwrite", action="store_true")

    track = commands.add_parser("track", help="Track the object of one or more sequences")
    track.add_argument("sequence", nargs="+", help="Sequence directories; several are scored together")
    _add_config_arguments(track)
    for flag in SWITCH_FLAGS:
        track.add_argument("--" + flag.replace("_", "-"), dest=flag, action="store_true")
    track.add_argument("--output", help="Estimate CSV (default <sequence>/estimates.csv)")
    track.add_argument("--twists", help="Write the velocity measurement stream to this CSV")
    track.add_argument("--overlays", help="Write silhouette overlays to this directory")
    _add_report_arguments(track)

    evaluate = commands.add_parser("evaluate", help="Score estimates against ground truth")
    evaluate.add_argument("--estimates", help="Estimate CSV")
    evaluate.add_argument("--baseline", metavar="POSES_CSV",
                          help="Score a delayed pose stream with zero-order hold instead of estimates")
    evaluate.add_argument("--ground-truth", required=True)
    evaluate.add_argument("--mesh", required=True, help="Object mesh file or procedural object name")
    evaluate.add_argument("--name", default="object")
    _add_config_arguments(evaluate)
    _add_report_arguments(evaluate)

    ablate = commands.add_parser("ablate", help="Run the ablation matrix on a sequence")
    ablate.add_argument("sequence")
    ablate.add_argument("--variants", nargs="+", choices=list(ABLATIONS), help="Subset of variants")
    _add_config_arguments(ablate)
    _add_report_arguments(ablate)
    return parser


def _emit(report: EvalReport, args: argparse.Namespace) -> None:
    text = get_report_writer(args.format)(report)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)


def _load_trajectory(path: str) -> Trajectory:
    try:
        with open(path) as handle:
            return trajectory_from_dict(yaml.safe_load(handle) or {})
    except OSError as exc:
        raise ConfigError(f"Cannot read trajectory {path}: {exc}") from exc
    except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Malformed trajectory {path}: {exc}") from exc


def run_generate(args: argparse.Namespace) -> int:
    if args.frames < 1:
        raise ConfigError(f"--frames must be positive, got {args.frames}")
    if args.trajectory:
        trajectory = _load_trajectory(args.trajectory)
    else:
        trajectory = default_trajectory(args.depth, args.speed, math.radians(args.angular_speed), args.approach)
    corruption = CorruptionSpec(
        mask_delay=args.mask_delay,
        pose_delay=args.pose_delay,
        pose_noise_t=args.pose_noise_t,
        pose_noise_rot=math.radians(args.pose_noise_rot),
        outlier_rate=args.outlier_rate,
        flow_noise=args.flow_noise,
        depth_noise=args.depth_noise,
        mask_miss_rate=args.mask_miss_rate,
        background_depth=args.background_depth,
    )
    root = generate_sequence(args.output, args.frames, args.fps, trajectory, corruption, object_mesh(args.object),
                             default_intrinsics(args.width, args.height, args.focal), args.seed, args.overwrite)
    if args.no_ground_truth:
        (root / "ground_truth.csv").unlink()
    return 0


def run_track(args: argparse.Namespace) -> int:
    overrides = list(args.overrides)
    overrides += [override for flag, override in SWITCH_FLAGS.items() if getattr(args, flag)]
    for key in ("output", "twists", "overlays"):
        value = getattr(args, key)
        if value:
            quoted = "'" + value.replace("'", "''") + "'"
            overrides.append(f"output.{'estimates' if key == 'output' else key}={quoted}")
    cfg = load_run_config(args.config, overrides)
    report = track_sequences(args.sequence, cfg)
    if report is not None:
        _emit(report, args)
    return 0


def run_evaluate(args: argparse.Namespace) -> int:
    if bool(args.estimates) == bool(args.baseline):
        raise ConfigError("Give exactly one of --estimates and --baseline")
    cfg = load_run_config(args.config, args.overrides)
    mesh = object_mesh(args.mesh)
    if args.baseline:
        report = evaluate_baseline(args.baseline, args.ground_truth, mesh, cfg)
    else:
        report = evaluate_files(args.estimates, args.ground_truth, mesh, cfg, args.name)
    _emit(report, args)
    return 0


def run_ablate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args.overrides)
    _emit(ablate_sequence(args.sequence, cfg, args.variants), args)
    return 0


COMMANDS = {"generate": run_generate, "track": run_track, "evaluate": run_evaluate, "ablate": run_ablate}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return COMMANDS[args.command](args)
    except TrackerError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
