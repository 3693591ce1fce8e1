"""
Synthetic rigid-body scenes with exact ground truth.
"""
from .trajectory import (
    CorruptionSpec, Keyframe, KeyframeTrajectory, Trajectory, TrajectorySegment, TrajectorySpec, screw_motion,
    trajectory_from_dict,
)
from .scene import (
    DelayedMeasurement, SequenceBundle, generate, ground_truth_flow_check,
    default_intrinsics, default_trajectory,
)
