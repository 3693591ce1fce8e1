"""
Analytic rigid-body scene generator.

generate() renders a mesh moving along a trajectory and emits every
stream the tracker consumes: measured depth, exact optical flow, delayed
masks and delayed poses, together with the ground truth they derive from.
Flow is obtained by exact projection differencing, so it carries every
higher-order effect the tracker's first-order flow model ignores.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..geometry.camera import CameraIntrinsics, backproject, flow_jacobian
from ..geometry.quaternion import UnitQuaternion
from ..geometry.types import DepthMap, FlowField, Mask, Pose, Twist
from ..rendering.mesh import TriangleMesh
from ..rendering.rasterizer import render_depth
from .trajectory import CorruptionSpec, Trajectory, TrajectorySpec

logger = logging.getLogger(__name__)

# Depth is stored in whole millimeters.
DEPTH_RESOLUTION = 1e-3

# A surface point counts as self-occluded when it lies this far (m) behind the rendered surface.
OCCLUSION_TOLERANCE = 1e-3


@dataclass(eq=False)
class DelayedMeasurement:
    """
    A mask or pose output together with its provenance.

    Attributes:
        available: Frame at which the output reaches the tracker
        origin: Frame the output was computed on
        value: The Mask or Pose
        injected: Whether the simulator replaced it with a gross outlier
    """
    available: int
    origin: int
    value: object
    injected: bool = False


@dataclass(eq=False)
class SequenceBundle:
    """
    Everything generate() produces for one sequence.

    Index k of the per-frame lists refers to frame k; flows[0] is a zero field
    since frame 0 has no predecessor.
    """
    intr: CameraIntrinsics
    fps: float
    mesh: TriangleMesh
    poses: List[Pose] = field(default_factory=list)
    twists: List[Twist] = field(default_factory=list)
    depths: List[DepthMap] = field(default_factory=list)
    exact_depths: List[DepthMap] = field(default_factory=list)
    flows: List[FlowField] = field(default_factory=list)
    masks: List[Mask] = field(default_factory=list)
    mask_stream: List[DelayedMeasurement] = field(default_factory=list)
    pose_stream: List[DelayedMeasurement] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return len(self.depths)

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    def masks_available_at(self, frame: int) -> List[DelayedMeasurement]:
        return [entry for entry in self.mask_stream if entry.available == frame]

    def poses_available_at(self, frame: int) -> List[DelayedMeasurement]:
        return [entry for entry in self.pose_stream if entry.available == frame]

    def depth_at(self, frame: int) -> DepthMap:
        return self.depths[frame]

    def flow_at(self, frame: int) -> FlowField:
        return self.flows[frame]

    def masks_at(self, frame: int) -> List[Tuple[Mask, int]]:
        return [(entry.value, entry.origin) for entry in self.masks_available_at(frame)]

    def poses_at(self, frame: int) -> List[Tuple[Pose, int]]:
        return [(entry.value, entry.origin) for entry in self.poses_available_at(frame)]


def _exact_flow(previous_depth: DepthMap, previous_pose: Pose, pose: Pose, current_depth: DepthMap,
                intr: CameraIntrinsics, zero_occluded: bool) -> np.ndarray:
    """
    Flow of the object pixels of the previous frame, zero elsewhere.
    """
    flow = np.zeros((intr.height, intr.width, 2), dtype=float)
    if np.array_equal(previous_pose.as_array(), pose.as_array()):
        return flow
    rows, cols = np.nonzero(previous_depth.valid)
    if len(rows) == 0:
        return flow
    points = backproject(cols, rows, previous_depth.data[rows, cols].astype(float), intr)
    moved = pose.apply(previous_pose.inverse().apply(points))
    in_front = moved[:, 2] > 0.0
    depth = np.where(in_front, moved[:, 2], 1.0)
    u = intr.cx + intr.fx * moved[:, 0] / depth
    v = intr.cy + intr.fy * moved[:, 1] / depth
    displacement = np.stack([u - cols, v - rows], axis=1)
    displacement[~in_front] = 0.0

    if zero_occluded:
        target_u = np.floor(u + 0.5).astype(np.int64)
        target_v = np.floor(v + 0.5).astype(np.int64)
        inside = (in_front & (target_u >= 0) & (target_u < intr.width)
                  & (target_v >= 0) & (target_v < intr.height))
        surface = np.full(len(rows), np.inf)
        surface[inside] = current_depth.data[target_v[inside], target_u[inside]]
        surface[surface == 0.0] = np.inf
        occluded = inside & (moved[:, 2] > surface + OCCLUSION_TOLERANCE)
        displacement[occluded] = 0.0

    flow[rows, cols] = displacement
    return flow


def _measured_depth(exact: DepthMap, corruption: CorruptionSpec, rng: np.random.Generator) -> DepthMap:
    data = exact.data.astype(float)
    valid = exact.valid
    if corruption.depth_noise > 0:
        data = np.where(valid, data + rng.normal(0.0, corruption.depth_noise, data.shape), data)
    if corruption.background_depth is not None:
        data = np.where(valid, data, corruption.background_depth)
    millimeters = np.maximum(np.round(data / DEPTH_RESOLUTION), 0.0)
    return DepthMap.from_millimeters(millimeters, exact.frame)


def _random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    vector = rng.normal(size=3)
    return vector / np.linalg.norm(vector)


def _measured_pose(truth: Pose, corruption: CorruptionSpec, rng: np.random.Generator,
                   allow_outlier: bool) -> DelayedMeasurement:
    t = truth.t + rng.normal(0.0, 1.0, 3) * corruption.pose_noise_t
    q = UnitQuaternion.from_rotvec(rng.normal(0.0, 1.0, 3) * corruption.pose_noise_rot) * truth.q
    injected = allow_outlier and rng.random() < corruption.outlier_rate
    if injected:
        t = t + _random_unit_vector(rng) * corruption.outlier_translation
        q = UnitQuaternion.from_rotvec(_random_unit_vector(rng) * corruption.outlier_rotation) * q
    return DelayedMeasurement(0, 0, Pose(t, q), injected)


def generate(spec: Trajectory, corruption: CorruptionSpec, mesh: TriangleMesh,
             intr: CameraIntrinsics, n_frames: int, seed: int = 0, fps: float = 30.0) -> SequenceBundle:
    """
    Simulate a sequence.

    Args:
        spec: Object trajectory
        corruption: Delays, noise and failures of the measurement streams
        mesh: Object mesh
        intr: Camera intrinsics
        n_frames: Number of frames
        seed: Random seed; the same seed reproduces the same bundle
        fps: Frame rate

    Returns:
        The generated bundle; shorter than n_frames when the object leaves the view

    Raises:
        ConfigError: If n_frames or fps is not positive, or the object is not
            visible in the first frame
    """
    if n_frames < 1:
        raise ConfigError(f"Number of frames must be positive, got {n_frames}")
    if not fps > 0:
        raise ConfigError(f"Frame rate must be positive, got {fps}")
    pose_rng, flow_rng, depth_rng, mask_rng = [
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)
    ]
    bundle = SequenceBundle(intr, fps, mesh)
    dt = 1.0 / fps

    previous_exact: Optional[DepthMap] = None
    for frame, (pose, twist) in enumerate(spec.sample(n_frames, dt)):
        exact = render_depth(mesh, pose, intr)
        exact.frame = frame
        if not exact.valid.any():
            if frame == 0:
                raise ConfigError("The object is not visible in the first frame")
            logger.warning("Object left the view at frame %d; truncating the sequence", frame)
            break
        if frame == 0:
            flow = np.zeros((intr.height, intr.width, 2))
        else:
            flow = _exact_flow(previous_exact, bundle.poses[-1], pose, exact, intr,
                               corruption.zero_occluded_flow)
            if corruption.flow_noise > 0:
                object_pixels = previous_exact.valid
                noise = flow_rng.normal(0.0, corruption.flow_noise, flow.shape)
                flow = np.where(object_pixels[..., None], flow + noise, flow)
        previous_exact = exact
        bundle.poses.append(pose)
        bundle.twists.append(twist)
        bundle.flows.append(FlowField(flow, frame))
        bundle.masks.append(Mask(exact.valid, frame))
        bundle.exact_depths.append(exact)
        bundle.depths.append(_measured_depth(exact, corruption, depth_rng))

    n = bundle.n_frames
    for available, origin in corruption.schedule(corruption.mask_delay, corruption.mask_period, n):
        if origin > 0 and mask_rng.random() < corruption.mask_miss_rate:
            continue
        bundle.mask_stream.append(DelayedMeasurement(available, origin, bundle.masks[origin]))
    for available, origin in corruption.schedule(corruption.pose_delay, corruption.pose_period, n):
        measurement = _measured_pose(bundle.poses[origin], corruption, pose_rng, allow_outlier=origin > 0)
        measurement.available, measurement.origin = available, origin
        bundle.pose_stream.append(measurement)
    return bundle


def ground_truth_flow_check(bundle: SequenceBundle, samples: int = 500, seed: int = 0) -> float:
    """
    Largest deviation (px) between the generated flow and the first-order flow model.

    For sampled object pixels of every frame pair, the stored flow F_k is
    compared with J(u, v, d)·V using the rendered depth of frame k-1, before
    noise and millimeter quantization, and the twist held at frame k-1.

    Args:
        bundle: Generated sequence
        samples: Pixels sampled per frame
        seed: Sampling seed

    Returns:
        The maximum residual norm in pixels
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for frame in range(1, bundle.n_frames):
        rows, cols = np.nonzero(bundle.masks[frame - 1].bitmap)
        depth = bundle.exact_depths[frame - 1].data[rows, cols].astype(float)
        keep = depth > 0.0
        rows, cols, depth = rows[keep], cols[keep], depth[keep]
        if len(rows) == 0:
            continue
        chosen = rng.choice(len(rows), size=min(samples, len(rows)), replace=False)
        rows, cols, depth = rows[chosen], cols[chosen], depth[chosen]
        jacobian = flow_jacobian(cols, rows, depth, bundle.intr, bundle.dt)
        predicted = jacobian @ bundle.twists[frame - 1].as_vector()
        measured = bundle.flows[frame].data[rows, cols].astype(float)
        worst = max(worst, float(np.max(np.linalg.norm(measured - predicted, axis=1))))
    return worst


def default_intrinsics(width: int = 640, height: int = 480, focal: float = 600.0) -> CameraIntrinsics:
    """Pinhole camera with the principal point at the image center."""
    return CameraIntrinsics(focal, focal, width / 2.0, height / 2.0, width, height)


def default_trajectory(depth: float = 0.8, speed: float = 0.3,
                       angular_speed: float = np.radians(90.0), approach: float = 0.0,
                       tilt: float = np.radians(30.0)) -> TrajectorySpec:
    """
    Constant-twist trajectory circling the optical axis.

    The object starts at depth meters, tilted by tilt radians about the x axis,
    and turns about the optical axis at angular_speed, which moves its origin
    at speed on a circle of radius speed / angular_speed. approach adds a
    constant velocity along the optical axis. With angular_speed zero the
    object translates along the x axis instead.
    """
    orientation = UnitQuaternion.from_axis_angle([1.0, 0.0, 0.0], tilt)
    if angular_speed == 0:
        return TrajectorySpec.constant(Pose([0.0, 0.0, depth], orientation),
                                       Twist([speed, 0.0, approach], [0.0, 0.0, 0.0]))
    radius = speed / angular_speed
    initial = Pose([radius, 0.0, depth], orientation)
    return TrajectorySpec.constant(initial, Twist([0.0, 0.0, approach], [0.0, 0.0, angular_speed]))
