"""
The per-frame tracking pipeline of one object.

Each frame runs three stages in order:

1. mask sync: propagate the current mask with F_k and catch up any delayed
   mask that arrived;
2. velocity: the twist filter turns F_k, the mask M_{k-1} and depth D_{k-1}
   into the velocity measurement V_k;
3. pose: the pose filter predicts, fuses V_k, then fuses the delayed pose
   measurements that arrived, rewinding to their origin frames.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Tuple

from typing_extensions import Protocol

from ..errors import DataError
from ..geometry.camera import CameraIntrinsics
from ..geometry.types import DepthMap, FlowField, Mask, Pose, Twist
from ..rendering.mesh import TriangleMesh
from ..utils.timing import StageTimer
from .mask_sync import MaskSyncState
from .pose_filter import OutlierGate, PoseBelief, PoseFilter
from .velocity_filter import TwistFilter

if TYPE_CHECKING:
    from ..io.config import RunConfig

logger = logging.getLogger(__name__)


class FrameSource(Protocol):
    """Frame-indexed inputs of a sequence, in memory or on disk."""

    intr: CameraIntrinsics
    fps: float

    @property
    def n_frames(self) -> int: ...

    @property
    def mesh(self) -> TriangleMesh: ...

    def depth_at(self, frame: int) -> DepthMap: ...

    def flow_at(self, frame: int) -> FlowField: ...

    def masks_at(self, frame: int) -> List[Tuple[Mask, int]]: ...

    def poses_at(self, frame: int) -> List[Tuple[Pose, int]]: ...


@dataclass(eq=False)
class FrameEstimate:
    """
    Tracker output for one frame.

    Attributes:
        frame: Frame index
        belief: Pose filter belief after the frame
        accepted: Whether a pose measurement processed at this frame was
            accepted; None when none arrived
    """
    frame: int
    belief: PoseBelief
    accepted: Optional[bool] = None

    @property
    def pose(self) -> Pose:
        return self.belief.mean.pose


@dataclass(eq=False)
class TrackerResult:
    """
    Output of a tracker run.

    Attributes:
        estimates: One estimate per frame, starting at frame 0
        twists: Velocity measurements V_k handed to the pose filter, by frame
        decisions: (available, origin, accepted) per processed pose measurement
        timer: Per-stage timing
    """
    estimates: List[FrameEstimate] = field(default_factory=list)
    twists: List[Tuple[int, Twist]] = field(default_factory=list)
    decisions: List[Tuple[int, int, bool]] = field(default_factory=list)
    timer: StageTimer = field(default_factory=StageTimer)


class Tracker:
    """
    Tracks one object from synchronized flow and depth plus delayed masks and poses.
    """

    def __init__(self, intr: CameraIntrinsics, cfg: 'RunConfig', mesh: Optional[TriangleMesh] = None,
                 timer: Optional[StageTimer] = None):
        """
        Args:
            intr: Camera intrinsics
            cfg: RunConfig with filter settings and ablation switches
            mesh: Object mesh; required for outlier rejection
            timer: Stage timer; a new one when None
        """
        self.intr = intr
        self.cfg = cfg
        self.switches = cfg.switches
        self.timer = timer or StageTimer()
        self.mask_sync = MaskSyncState(cfg.mask_delay, capacity=cfg.history_capacity,
                                       synchronize=self.switches.use_mask_sync)
        self.twist_filter = TwistFilter(intr, cfg.twist)
        self.gate: Optional[OutlierGate] = None
        if self.switches.use_outlier_rejection and self.switches.use_pose:
            if mesh is None:
                logger.warning("No object mesh; pose measurements are fused without outlier rejection")
            else:
                self.gate = OutlierGate(mesh, intr, cfg.pose.gamma, timer=self.timer)
        self.pose_filter: Optional[PoseFilter] = None
        self.frame = -1
        self._previous_mask: Optional[Mask] = None
        self._previous_depth: Optional[DepthMap] = None

    def start(self, depth: DepthMap, masks: List[Tuple[Mask, int]],
              poses: List[Tuple[Pose, int]]) -> FrameEstimate:
        """
        Initialize on frame 0 from the first pose measurement.

        Raises:
            DataError: If no pose measured on frame 0 is available at frame 0
        """
        initial = [pose for pose, origin in poses if origin == 0]
        if not initial:
            raise DataError("No initial pose measurement at frame 0", frame=0)
        depth.check_size(self.intr.width, self.intr.height)
        for mask, origin in masks:
            self.mask_sync.catch_up(mask, origin)
        self.pose_filter = PoseFilter(self.cfg.pose, initial[0], 0, self.gate, depth, self.cfg.history_capacity)
        self.frame = 0
        self._previous_mask = self.mask_sync.mask
        self._previous_depth = depth
        return FrameEstimate(0, self.pose_filter.belief, True)

    def process(self, frame: int, flow: FlowField, depth: DepthMap, masks: List[Tuple[Mask, int]],
                poses: List[Tuple[Pose, int]]) -> Tuple[FrameEstimate, Optional[Twist], List[Tuple[int, bool]]]:
        """
        Process frame k.

        Args:
            frame: Frame index, one past the last processed frame
            flow: Optical flow F_k
            depth: Depth D_k
            masks: Delayed masks that arrived at frame k, with origin frames
            poses: Delayed pose measurements that arrived at frame k, with origin frames

        Returns:
            The estimate, the velocity measurement V_k (None when the velocity
            stage is disabled) and (origin, accepted) per processed pose
        """
        if self.pose_filter is None:
            raise RuntimeError("Tracker.start() must be called before process()")
        flow.check_size(self.intr.width, self.intr.height)
        depth.check_size(self.intr.width, self.intr.height)

        with self.timer.stage("mask_sync"):
            mask = self.mask_sync.advance(flow)
            for delayed, origin in masks:
                mask = self.mask_sync.catch_up(delayed, origin)

        velocity: Optional[Twist] = None
        if self.switches.use_velocity:
            with self.timer.stage("velocity_kf"):
                velocity = self.twist_filter.step(flow, self._previous_mask, self._previous_depth)

        decisions: List[Tuple[int, bool]] = []
        with self.timer.stage("pose_ukf"):
            self.pose_filter.step(velocity, frame, depth)
            if self.switches.use_pose:
                for pose, origin in poses:
                    target = origin if self.switches.use_pose_sync else frame
                    decisions.append((origin, self.pose_filter.on_pose_measurement(pose, target)))

        self.timer.frame_done()
        self.frame = frame
        self._previous_mask = mask
        self._previous_depth = depth
        accepted = any(ok for _, ok in decisions) if decisions else None
        return FrameEstimate(frame, self.pose_filter.belief, accepted), velocity, decisions


def run_tracker(source: FrameSource, cfg: 'RunConfig', mesh: Optional[TriangleMesh] = None) -> TrackerResult:
    """
    Track an object through a whole sequence.

    Args:
        source: Sequence inputs
        cfg: RunConfig
        mesh: Object mesh for outlier rejection; defaults to the source's mesh

    Returns:
        Per-frame estimates, the velocity stream, pose decisions and timing

    Raises:
        DataError: If the initial pose is missing or a frame file is malformed
    """
    result = TrackerResult()
    if mesh is None and cfg.switches.use_pose and cfg.switches.use_outlier_rejection:
        mesh = source.mesh
    tracker = Tracker(source.intr, cfg, mesh, result.timer)
    result.estimates.append(tracker.start(source.depth_at(0), source.masks_at(0), source.poses_at(0)))
    for frame in range(1, source.n_frames):
        estimate, velocity, decisions = tracker.process(
            frame, source.flow_at(frame), source.depth_at(frame), source.masks_at(frame), source.poses_at(frame)
        )
        result.estimates.append(estimate)
        if velocity is not None:
            result.twists.append((frame, velocity))
        result.decisions.extend((frame, origin, accepted) for origin, accepted in decisions)
    result.timer.log_summary()
    return result
