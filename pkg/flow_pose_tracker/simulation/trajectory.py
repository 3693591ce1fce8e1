"""
Object trajectories and measurement corruption settings for the scene simulator.

A TrajectorySpec is a chain of segments, each moving the object with a
constant twist (v_O, ω) expressed in the camera frame. Within a segment the
motion is the exact screw motion generated by that twist, so the velocity of
the point at the camera origin stays constant while the object origin may
follow a helix. A KeyframeTrajectory instead passes smoothly through
keyframed poses, with a cubic spline for the position and a rotation spline
for the orientation.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation, RotationSpline
from typing_extensions import Protocol

from ..errors import ConfigError
from ..geometry.quaternion import UnitQuaternion
from ..geometry.types import Pose, Twist


def _skew(vector: np.ndarray) -> np.ndarray:
    x, y, z = vector
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def screw_motion(twist: Twist, duration: float) -> Pose:
    """
    Rigid displacement produced by holding a camera-frame twist for duration seconds.

    The result is applied on the left: pose(τ + duration) = screw_motion(...) ∘ pose(τ).
    """
    rotvec = twist.omega * duration
    translation = twist.v_o * duration
    angle = float(np.linalg.norm(rotvec))
    skew = _skew(rotvec)
    if angle < 1e-8:
        left_jacobian = np.eye(3) + skew / 2.0 + skew @ skew / 6.0
    else:
        left_jacobian = (np.eye(3)
                         + (1.0 - math.cos(angle)) / angle ** 2 * skew
                         + (angle - math.sin(angle)) / angle ** 3 * skew @ skew)
    return Pose(left_jacobian @ translation, UnitQuaternion.from_rotvec(rotvec))


class Trajectory(Protocol):
    """Object motion the scene generator can sample."""

    def pose_at(self, time: float) -> Pose: ...

    def twist_at(self, time: float) -> Twist: ...

    def sample(self, n_frames: int, dt: float) -> List[Tuple[Pose, Twist]]: ...


def _pose_from_dict(values: dict) -> Pose:
    return Pose(values.get("t", [0.0, 0.0, 1.0]), UnitQuaternion.from_array(values.get("q", [1.0, 0.0, 0.0, 0.0])))


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """
    Constant-twist stretch of a trajectory.

    Attributes:
        duration: Length in seconds
        twist: Camera-frame twist held during the segment
    """
    duration: float
    twist: Twist

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f"Segment duration must be positive, got {self.duration}")


@dataclass(eq=False)
class TrajectorySpec:
    """
    Piecewise constant-twist trajectory.

    The last segment extends past its duration, so any time after the start is
    covered.

    Attributes:
        initial_pose: Object pose at time 0
        segments: Motion segments in order
    """
    initial_pose: Pose
    segments: List[TrajectorySegment] = field(default_factory=list)

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("A trajectory needs at least one segment")

    @classmethod
    def constant(cls, initial_pose: Pose, twist: Twist, duration: float = 5.0) -> 'TrajectorySpec':
        return cls(initial_pose, [TrajectorySegment(duration, twist)])

    @classmethod
    def from_dict(cls, values: dict) -> 'TrajectorySpec':
        """
        Build a trajectory from plain values, as read from YAML.

        Expected keys: "initial_pose" with "t" and "q" (scalar-first), and
        "segments", a list of {"duration", "v_o", "omega"} entries.
        """
        initial_pose = _pose_from_dict(values.get("initial_pose", {}))
        segments = [
            TrajectorySegment(float(entry["duration"]),
                              Twist(entry.get("v_o", [0.0, 0.0, 0.0]), entry.get("omega", [0.0, 0.0, 0.0])))
            for entry in values.get("segments", [])
        ]
        return cls(initial_pose, segments)

    def _segment_spans(self) -> List[Tuple[float, float, TrajectorySegment]]:
        spans = []
        start = 0.0
        for index, segment in enumerate(self.segments):
            end = math.inf if index == len(self.segments) - 1 else start + segment.duration
            spans.append((start, end, segment))
            start += segment.duration
        return spans

    def twist_at(self, time: float) -> Twist:
        """Twist held at time (seconds)."""
        for start, end, segment in self._segment_spans():
            if start <= time < end:
                return segment.twist
        return self.segments[0].twist

    def pose_at(self, time: float) -> Pose:
        """Object pose at time (seconds)."""
        if time < 0:
            raise ValueError(f"Time must not be negative, got {time}")
        pose = self.initial_pose
        for start, end, segment in self._segment_spans():
            if time <= start:
                break
            held = min(time, end) - start
            if np.any(segment.twist.as_vector()):
                pose = screw_motion(segment.twist, held).compose(pose)
        return pose

    def sample(self, n_frames: int, dt: float) -> List[Tuple[Pose, Twist]]:
        """Poses and twists at frames 0..n_frames-1."""
        return [(self.pose_at(k * dt), self.twist_at(k * dt)) for k in range(n_frames)]


@dataclass(frozen=True, eq=False)
class Keyframe:
    """
    Object pose prescribed at one instant.

    Attributes:
        time: Seconds from the start
        pose: Object pose at that time
    """
    time: float
    pose: Pose


# Half-width (s) of the central difference that gives the angular velocity of a keyframe trajectory.
ANGULAR_RATE_STEP = 1e-5


class KeyframeTrajectory:
    """
    Smooth trajectory through keyframed poses.

    The position follows a cubic spline that starts and ends at rest; the
    orientation follows a rotation spline. After the last keyframe the object
    holds its final pose with zero twist.
    """

    def __init__(self, keyframes: Sequence[Keyframe]):
        keyframes = list(keyframes)
        if len(keyframes) < 2:
            raise ConfigError(f"A keyframe trajectory needs at least two keyframes, got {len(keyframes)}")
        times = np.array([keyframe.time for keyframe in keyframes], dtype=float)
        if times[0] != 0.0:
            raise ConfigError(f"The first keyframe must be at time 0, got {times[0]}")
        if np.any(np.diff(times) <= 0.0):
            raise ConfigError("Keyframe times must be strictly increasing")
        self.keyframes = keyframes
        self.duration = float(times[-1])
        self._position = CubicSpline(times, np.stack([keyframe.pose.t for keyframe in keyframes]),
                                     bc_type="clamped")
        # scipy stores quaternions scalar-last
        scalar_last = np.stack([np.roll(keyframe.pose.q.as_array(), -1) for keyframe in keyframes])
        self._rotation = RotationSpline(times, Rotation.from_quat(scalar_last))

    @classmethod
    def from_dict(cls, values: dict) -> 'KeyframeTrajectory':
        """
        Build a trajectory from plain values, as read from YAML.

        Expected key: "keyframes", a list of {"time", "t", "q"} entries with
        scalar-first quaternions.
        """
        return cls([Keyframe(float(entry["time"]), _pose_from_dict(entry)) for entry in values["keyframes"]])

    def _orientation(self, time: float) -> np.ndarray:
        return np.roll(self._rotation(time).as_quat(), 1)

    def pose_at(self, time: float) -> Pose:
        """Object pose at time (seconds)."""
        if time < 0:
            raise ValueError(f"Time must not be negative, got {time}")
        time = min(time, self.duration)
        return Pose(self._position(time), UnitQuaternion.from_array(self._orientation(time)))

    def twist_at(self, time: float) -> Twist:
        """Twist at time (seconds), zero once the last keyframe is reached."""
        if time >= self.duration:
            return Twist.zero()
        time = max(time, 0.0)
        before = max(time - ANGULAR_RATE_STEP, 0.0)
        after = min(time + ANGULAR_RATE_STEP, self.duration)
        turn = (UnitQuaternion.from_array(self._orientation(after))
                * UnitQuaternion.from_array(self._orientation(before)).conjugate())
        omega = turn.as_rotvec() / (after - before)
        return Twist.from_origin_velocity(self._position(time), self._position(time, 1), omega)

    def sample(self, n_frames: int, dt: float) -> List[Tuple[Pose, Twist]]:
        """Poses and twists at frames 0..n_frames-1."""
        return [(self.pose_at(k * dt), self.twist_at(k * dt)) for k in range(n_frames)]


def trajectory_from_dict(values: dict) -> Trajectory:
    """
    Build a segment or keyframe trajectory from plain values, as read from YAML.

    A "keyframes" key selects KeyframeTrajectory; otherwise the values
    describe a TrajectorySpec.
    """
    if "keyframes" in values:
        return KeyframeTrajectory.from_dict(values)
    return TrajectorySpec.from_dict(values)


@dataclass
class CorruptionSpec:
    """
    Delays, noise and failures applied to the simulated measurement streams.

    Attributes:
        mask_delay: Mask delay N_s (frames)
        pose_delay: Pose delay N_p (frames)
        mask_period: Frames between mask outputs (defaults to max(mask_delay, 1))
        pose_period: Frames between pose outputs (defaults to max(pose_delay, 1))
        pose_noise_t: Pose translation noise std (m)
        pose_noise_rot: Pose rotation noise std (rad)
        outlier_rate: Probability that a pose measurement is a gross outlier
        outlier_translation: Outlier translation offset (m)
        outlier_rotation: Outlier rotation offset (rad)
        flow_noise: Flow noise std (px)
        depth_noise: Depth noise std (m)
        mask_miss_rate: Probability that a scheduled mask is missing
        zero_occluded_flow: Zero the flow of pixels that become self-occluded
        background_depth: Depth of a fronto-parallel background plane (m), or None
    """
    mask_delay: int = 6
    pose_delay: int = 6
    mask_period: Optional[int] = None
    pose_period: Optional[int] = None
    pose_noise_t: float = 0.0
    pose_noise_rot: float = 0.0
    outlier_rate: float = 0.0
    outlier_translation: float = 0.20
    outlier_rotation: float = math.radians(45.0)
    flow_noise: float = 0.0
    depth_noise: float = 0.0
    mask_miss_rate: float = 0.0
    zero_occluded_flow: bool = False
    background_depth: Optional[float] = None

    def __post_init__(self):
        if self.mask_delay < 0 or self.pose_delay < 0:
            raise ConfigError("Delays must not be negative")
        self.mask_period = self.mask_period or max(self.mask_delay, 1)
        self.pose_period = self.pose_period or max(self.pose_delay, 1)
        if self.mask_period < 1 or self.pose_period < 1:
            raise ConfigError("Measurement periods must be at least one frame")
        for name in ("outlier_rate", "mask_miss_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        for name in ("pose_noise_t", "pose_noise_rot", "outlier_translation", "outlier_rotation",
                     "flow_noise", "depth_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative, got {getattr(self, name)}")
        if self.background_depth is not None and not self.background_depth > 0:
            raise ConfigError(f"background_depth must be positive, got {self.background_depth}")

    @classmethod
    def clean(cls, delay: int = 6) -> 'CorruptionSpec':
        """Exact measurements with both delays set to delay."""
        return cls(mask_delay=delay, pose_delay=delay)

    def schedule(self, delay: int, period: int, n_frames: int) -> Sequence[Tuple[int, int]]:
        """
        (available, origin) pairs of a delayed stream.

        The output of frame 0 is available immediately; later outputs are
        computed on multiples of period and become available delay frames later.
        """
        pairs = [(0, 0)]
        origin = period
        while origin + delay < n_frames:
            pairs.append((origin + delay, origin))
            origin += period
        return pairs
