"""
Pose and velocity error measures.

Errors are computed per frame on aligned traces; the aggregate numbers are
root-mean-square values of those per-frame errors, or the ADD-AUC score.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DimensionMismatchError
from ..geometry.quaternion import geodesic_angles, quat_to_matrix
from ..geometry.types import Pose

# Upper end of the ADD accuracy-threshold sweep (m).
ADD_AUC_THRESHOLD = 0.10


@dataclass(eq=False)
class PoseTrace:
    """
    Per-frame pose and velocity of one object.

    Attributes:
        frames: Frame indices, shape (n,)
        t: Positions (m), shape (n, 3)
        q: Scalar-first quaternions, shape (n, 4)
        v: Velocities of the object origin (m/s), shape (n, 3), or None
        omega: Angular velocities (rad/s), shape (n, 3), or None
    """
    frames: np.ndarray
    t: np.ndarray
    q: np.ndarray
    v: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        n = len(self.frames)
        self.t = np.asarray(self.t, dtype=float).reshape(n, 3)
        self.q = np.asarray(self.q, dtype=float).reshape(n, 4)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float).reshape(n, 3)
        if self.omega is not None:
            self.omega = np.asarray(self.omega, dtype=float).reshape(n, 3)

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_poses(cls, poses: Sequence[Pose], frames: Optional[Sequence[int]] = None,
                   v: Optional[np.ndarray] = None, omega: Optional[np.ndarray] = None) -> 'PoseTrace':
        frames = np.arange(len(poses)) if frames is None else frames
        return cls(frames, [pose.t for pose in poses], [pose.q.as_array() for pose in poses], v, omega)

    def pose(self, index: int) -> Pose:
        return Pose.from_array(np.concatenate([self.t[index], self.q[index]]))


def _check_aligned(est: PoseTrace, gt: PoseTrace) -> None:
    if len(est) != len(gt):
        raise DimensionMismatchError("Trace", (len(gt),), (len(est),))
    if not np.array_equal(est.frames, gt.frames):
        raise ValueError("Traces are not aligned on the same frames")


def add_error(est: Pose, gt: Pose, model_points: np.ndarray) -> float:
    """
    Average distance between the model points placed by est and by gt.

    Raises:
        ValueError: If model_points is empty
    """
    model_points = np.asarray(model_points, dtype=float).reshape(-1, 3)
    if len(model_points) == 0:
        raise ValueError("ADD needs at least one model point")
    return float(np.mean(np.linalg.norm(est.apply(model_points) - gt.apply(model_points), axis=1)))


def add_errors(est: PoseTrace, gt: PoseTrace, model_points: np.ndarray) -> np.ndarray:
    """Vectorized add_error over aligned traces."""
    _check_aligned(est, gt)
    model_points = np.asarray(model_points, dtype=float).reshape(-1, 3)
    if len(model_points) == 0:
        raise ValueError("ADD needs at least one model point")
    placed_est = np.einsum("nij,mj->nmi", quat_to_matrix(est.q), model_points) + est.t[:, None, :]
    placed_gt = np.einsum("nij,mj->nmi", quat_to_matrix(gt.q), model_points) + gt.t[:, None, :]
    return np.mean(np.linalg.norm(placed_est - placed_gt, axis=2), axis=1)


def add_auc(errors: Sequence[float], threshold_max: float = ADD_AUC_THRESHOLD) -> float:
    """
    Area under the ADD accuracy-vs-threshold curve, in percent.

    The accuracy at threshold τ is the fraction of frames whose error does not
    exceed τ. The curve is a step function, so it is integrated in closed
    form over [0, threshold_max] rather than sampled on a threshold grid; an
    error e contributes (threshold_max - e) / threshold_max and errors beyond
    threshold_max contribute nothing. A discrete sweep converges to this value
    as its threshold step shrinks.

    Raises:
        ValueError: If errors is empty or threshold_max is not positive
    """
    errors = np.asarray(errors, dtype=float).reshape(-1)
    if errors.size == 0:
        raise ValueError("ADD-AUC needs at least one error")
    if not threshold_max > 0:
        raise ValueError(f"threshold_max must be positive, got {threshold_max}")
    covered = np.clip(threshold_max - errors, 0.0, threshold_max) / threshold_max
    return float(100.0 * np.mean(covered))


def translation_errors(est: PoseTrace, gt: PoseTrace) -> np.ndarray:
    """Per-frame |t_est - t_gt| (m)."""
    _check_aligned(est, gt)
    return np.linalg.norm(est.t - gt.t, axis=1)


def angular_errors(est: PoseTrace, gt: PoseTrace) -> np.ndarray:
    """Per-frame geodesic angle between the orientations (rad), in [0, π]."""
    _check_aligned(est, gt)
    return geodesic_angles(est.q, gt.q)


def velocity_errors(est: PoseTrace, gt: PoseTrace) -> np.ndarray:
    """Per-frame |v_est - v_gt| (m/s)."""
    _check_aligned(est, gt)
    if est.v is None or gt.v is None:
        raise ValueError("Both traces need velocities")
    return np.linalg.norm(est.v - gt.v, axis=1)


def angular_velocity_errors(est: PoseTrace, gt: PoseTrace) -> np.ndarray:
    """Per-frame |ω_est - ω_gt| (rad/s)."""
    _check_aligned(est, gt)
    if est.omega is None or gt.omega is None:
        raise ValueError("Both traces need angular velocities")
    return np.linalg.norm(est.omega - gt.omega, axis=1)


def rmse(errors: Sequence[float]) -> float:
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("RMSE of an empty error list")
    return float(np.sqrt(np.mean(errors ** 2)))
