"""
End-to-end operations behind the command line: generate, track, evaluate, ablate.
"""
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core.tracker import FrameEstimate, TrackerResult, run_tracker
from .errors import ConfigError, DataError
from .geometry.camera import CameraIntrinsics
from .geometry.types import Mask
from .io.config import ABLATIONS, RunConfig
from .io.sequence import SequenceReader, frame_name, write_overlay, write_sequence
from .io.traces import align_traces, load_ground_truth, write_estimates, write_twists, zero_order_hold
from .metrics.pose_metrics import PoseTrace
from .metrics.report import EvalReport, combine_reports, evaluate_traces
from .rendering.mesh import TriangleMesh, box_mesh, cylinder_mesh, load_mesh, sample_surface_points
from .rendering.rasterizer import render_depth
from .simulation.scene import default_intrinsics, default_trajectory, generate
from .simulation.trajectory import CorruptionSpec, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

OBJECTS = {"box": box_mesh, "cylinder": cylinder_mesh}


def object_mesh(name: str) -> TriangleMesh:
    """
    A procedural mesh by name, or a mesh file when name is a path.

    Raises:
        DataError: If name is neither a known object nor a readable mesh file
    """
    if name in OBJECTS:
        return OBJECTS[name]()
    if Path(name).is_file():
        return load_mesh(name)
    raise DataError(f"Unknown object '{name}', expected one of {sorted(OBJECTS)} or a mesh file")


def generate_sequence(output: PathLike, frames: int = 150, fps: float = 30.0,
                      trajectory: Optional[Trajectory] = None,
                      corruption: Optional[CorruptionSpec] = None,
                      mesh: Optional[TriangleMesh] = None,
                      intr: Optional[CameraIntrinsics] = None,
                      seed: int = 0, overwrite: bool = False) -> Path:
    """
    Simulate a sequence and store it in the sequence layout.

    Defaults give a 150-frame box sequence at 30 fps with six-frame mask and
    pose delays.

    Raises:
        ConfigError: If frames or fps is not positive
        DataError: If the output directory is not empty or not writable
    """
    bundle = generate(trajectory or default_trajectory(), corruption or CorruptionSpec(),
                      mesh or box_mesh(), intr or default_intrinsics(), frames, seed, fps)
    return write_sequence(bundle, output, overwrite)


def estimates_trace(estimates: Iterable[FrameEstimate]) -> PoseTrace:
    """Per-frame pose and velocity estimates as a trace."""
    estimates = list(estimates)
    states = [estimate.belief.mean for estimate in estimates]
    return PoseTrace(
        [estimate.frame for estimate in estimates],
        [state.t for state in states],
        [state.q.as_array() for state in states],
        [state.v for state in states],
        [state.omega for state in states],
    )


def model_points(mesh: TriangleMesh, cfg: RunConfig) -> np.ndarray:
    return sample_surface_points(mesh, cfg.evaluation.model_points, seed=0)


def write_overlays(directory: PathLike, reader: SequenceReader, result: TrackerResult) -> None:
    """Write one overlay per frame: measured depth with the estimated silhouette outline."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for estimate in result.estimates:
        rendered = render_depth(reader.mesh, estimate.pose, reader.intr)
        write_overlay(directory / frame_name(estimate.frame, ".png"), reader.depth_at(estimate.frame),
                      Mask(rendered.valid, estimate.frame))


def evaluate_files(est_path: PathLike, gt_path: PathLike, mesh: TriangleMesh, cfg: RunConfig,
                   name: str = "object") -> EvalReport:
    """
    Score an estimate CSV against ground truth.

    Raises:
        DataError: If the files are malformed or not aligned frame by frame
    """
    est, gt = align_traces(est_path, gt_path)
    return evaluate_traces(est, gt, model_points(mesh, cfg), name, cfg.evaluation.threshold_max)


def evaluate_baseline(poses_path: PathLike, gt_path: PathLike, mesh: TriangleMesh, cfg: RunConfig,
                      name: str = "zero_order_hold") -> EvalReport:
    """Score the delayed pose stream held at the input frame rate, without any filtering."""
    baseline, gt = zero_order_hold(poses_path, gt_path)
    return evaluate_traces(baseline, gt, model_points(mesh, cfg), name, cfg.evaluation.threshold_max)


def track_sequence(root: PathLike, cfg: RunConfig) -> Tuple[TrackerResult, Optional[EvalReport]]:
    """
    Track a stored sequence and write its outputs.

    The estimates go to cfg.output.estimates (default <root>/estimates.csv).
    The twist stream and overlays are written when their paths are set;
    sequences without ground truth always get overlays (default
    <root>/overlays) since they cannot be scored.

    Returns:
        The tracker result and, when ground truth is present, its evaluation
    """
    reader = SequenceReader(root)
    cfg = cfg.at_frame_rate(reader.fps)
    result = run_tracker(reader, cfg)

    estimates_path = Path(cfg.output.estimates or Path(root) / "estimates.csv")
    write_estimates(estimates_path, result.estimates)
    logger.info("Wrote %d estimates to %s", len(result.estimates), estimates_path)
    if cfg.output.twists:
        write_twists(cfg.output.twists, result.twists)

    overlays = cfg.output.overlays
    if overlays is None and reader.ground_truth_path is None:
        overlays = Path(root) / "overlays"
    if overlays is not None:
        write_overlays(overlays, reader, result)

    if reader.ground_truth_path is None:
        logger.info("No ground truth in %s; skipping evaluation", root)
        return result, None
    return result, evaluate_files(estimates_path, reader.ground_truth_path, reader.mesh, cfg, Path(root).name)


def track_sequences(roots: Sequence[PathLike], cfg: RunConfig) -> Optional[EvalReport]:
    """
    Track several stored sequences and score them together.

    Every sequence is tracked as by track_sequence, with one row per scored
    sequence. With more than one, an "all" row pools their frames.

    Returns:
        The report over the sequences with ground truth, or None when none has any

    Raises:
        ConfigError: If output paths are set for more than one sequence
    """
    if len(roots) > 1 and any((cfg.output.estimates, cfg.output.twists, cfg.output.overlays)):
        raise ConfigError("Output paths can only be set when tracking a single sequence")
    reports = []
    for root in roots:
        _, report = track_sequence(root, cfg)
        if report is not None:
            reports.append(report)
    if not reports:
        return None
    return reports[0] if len(reports) == 1 else combine_reports(reports)


def ablate_sequence(root: PathLike, cfg: RunConfig, variants: Optional[List[str]] = None) -> EvalReport:
    """
    Track a sequence once per ablation variant and score each run.

    Returns:
        A report with one row per variant, in the order given

    Raises:
        DataError: If the sequence has no ground truth
    """
    reader = SequenceReader(root)
    if reader.ground_truth_path is None:
        raise DataError("Ablations need ground truth", path=str(reader.root))
    cfg = cfg.at_frame_rate(reader.fps)
    gt = load_ground_truth(reader.ground_truth_path)
    points = model_points(reader.mesh, cfg)

    reports = []
    for variant in variants or list(ABLATIONS):
        result = run_tracker(reader, cfg.ablated(variant))
        report = evaluate_traces(estimates_trace(result.estimates), gt, points, variant,
                                 cfg.evaluation.threshold_max)
        logger.info("Ablation %s: ADD-AUC %.2f%%", variant, report.aggregate.add_auc)
        reports.append(report)
    return combine_reports(reports, name=None)
