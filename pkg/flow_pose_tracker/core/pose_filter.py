"""
Quaternion error-state Unscented Kalman filter over x = [t, v, q, ω].

The covariance lives in a 12-dimensional error space (δt, δv, δθ, δω), where
δθ is a rotation vector applied on the left of the mean quaternion:
q = exp(δθ) ⊗ q̄. Sigma points and weights come from filterpy's scaled
sigma-point generator; they are pushed through the constant-velocity model
and the measurement map as stacked arrays.

PoseFilter adds the bookkeeping around the bare filter: a per-frame history,
rewind-and-replay for delayed pose measurements and the depth-rendering
outlier gate.
"""
import logging
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from filterpy.kalman import MerweScaledSigmaPoints
from scipy import linalg

from ..errors import ConfigError, MissingHistoryError, NumericalError, TrackerError
from ..geometry.camera import CameraIntrinsics
from ..geometry.quaternion import (
    UnitQuaternion, quat_conjugate, quat_exp, quat_log, quat_multiply, quat_normalize, quat_transition,
)
from ..geometry.types import DepthMap, Pose, Twist
from ..rendering.mesh import TriangleMesh
from ..rendering.rasterizer import MIN_OVERLAP_PIXELS, depth_error, render_depth
from ..utils.timing import StageTimer
from ..utils.validation import require_positive, require_psd
from .history import HistoryBuffer, HistoryRecord

logger = logging.getLogger(__name__)

STATE_DIM = 12
POSITION, VELOCITY, ROTATION, ANGULAR = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)

# Iterative quaternion averaging stops when the mean error vector is this small (radians).
AVERAGING_TOLERANCE = 1e-12
AVERAGING_MAX_ITERATIONS = 20


@dataclass(frozen=True, eq=False)
class PoseState:
    """
    Mean of the pose filter.

    Attributes:
        t: Object position in the camera frame (m)
        v: Velocity of the object origin (m/s)
        q: Object-to-camera rotation
        omega: Angular velocity, camera frame (rad/s)
    """
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: UnitQuaternion = field(default_factory=UnitQuaternion.identity)
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("t", "v", "omega"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3).copy())

    @classmethod
    def from_pose(cls, pose: Pose) -> 'PoseState':
        """A state at pose with zero velocity."""
        return cls(t=pose.t, q=pose.q)

    @property
    def pose(self) -> Pose:
        return Pose(self.t, self.q)

    @property
    def twist(self) -> Twist:
        """The twist (v_O, ω) implied by the state."""
        return Twist.from_origin_velocity(self.t, self.v, self.omega)

    def boxplus(self, delta: np.ndarray) -> 'PoseState':
        """Apply a 12-dimensional error-state increment."""
        delta = np.asarray(delta, dtype=float).reshape(STATE_DIM)
        q = quat_multiply(quat_exp(delta[ROTATION]), self.q.as_array())
        return PoseState(self.t + delta[POSITION], self.v + delta[VELOCITY],
                         UnitQuaternion.from_array(q), self.omega + delta[ANGULAR])


@dataclass(eq=False)
class PoseBelief:
    """Mean state and 12x12 error-state covariance."""
    mean: PoseState
    covariance: np.ndarray

    @classmethod
    def initial(cls, pose: Pose, cfg: 'PoseFilterConfig') -> 'PoseBelief':
        """
        Belief seeded by the first pose measurement, object at rest.
        """
        variances = np.concatenate([
            np.full(3, cfg.initial_position_variance),
            np.full(3, cfg.initial_velocity_variance),
            np.full(3, cfg.initial_rotation_variance),
            np.full(3, cfg.initial_angular_variance),
        ])
        return cls(PoseState.from_pose(pose), np.diag(variances))


@dataclass(eq=False)
class PoseFilterConfig:
    """
    Noise model, delay and sigma-point spread of the pose filter.

    Attributes:
        q_t: Process noise of (t, v), 6x6
        q_q: Process noise of ω, 3x3; reaches q only through ω
        r_t, r_q, r_v, r_omega: Measurement noise of t, q (rotation vector), v_O and ω
        gamma: Outlier threshold on the depth-error increase (m)
        delay: Pose measurement delay N_p (frames)
        dt: Frame period (s)
        alpha, beta, kappa: Scaled sigma-point parameters
    """
    q_t: np.ndarray = field(default_factory=lambda: linalg.block_diag(1e-6 * np.eye(3), 1e-3 * np.eye(3)))
    q_q: np.ndarray = field(default_factory=lambda: 1e-2 * np.eye(3))
    r_t: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    r_q: np.ndarray = field(default_factory=lambda: 1e-2 * np.eye(3))
    r_v: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    r_omega: np.ndarray = field(default_factory=lambda: 1e-3 * np.eye(3))
    gamma: float = 0.02
    delay: int = 6
    dt: float = 1.0 / 30.0
    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0
    initial_position_variance: float = 1e-4
    initial_rotation_variance: float = 1e-2
    initial_velocity_variance: float = 1.0
    initial_angular_variance: float = 1.0
    sigma_points: MerweScaledSigmaPoints = field(init=False, repr=False)

    def __post_init__(self):
        self.q_t = require_psd("q_t", self.q_t, 6)
        for name in ("q_q", "r_t", "r_q", "r_v", "r_omega"):
            setattr(self, name, require_psd(name, getattr(self, name), 3))
        require_positive("gamma", self.gamma)
        if self.delay < 1:
            raise ConfigError(f"Pose delay must be at least 1 frame, got {self.delay}")
        require_positive("dt", self.dt)
        require_positive("alpha", self.alpha)
        for name in ("initial_position_variance", "initial_rotation_variance",
                     "initial_velocity_variance", "initial_angular_variance"):
            require_positive(name, getattr(self, name))
        self.sigma_points = MerweScaledSigmaPoints(STATE_DIM, alpha=self.alpha, beta=self.beta, kappa=self.kappa)

    @property
    def process_noise(self) -> np.ndarray:
        return linalg.block_diag(self.q_t, np.zeros((3, 3)), self.q_q)

    @property
    def measurement_noise(self) -> Dict[str, np.ndarray]:
        return {"t": self.r_t, "q": self.r_q, "v_o": self.r_v, "omega": self.r_omega}


class _SigmaSet:
    """
    Sigma points of a belief as stacked state arrays.

    Attributes:
        deltas: Error-state offsets from the mean, shape (2n+1, 12)
        t, v, q, omega: Stacked sigma states
    """

    def __init__(self, belief: PoseBelief, cfg: PoseFilterConfig):
        try:
            self.deltas = cfg.sigma_points.sigma_points(np.zeros(STATE_DIM), belief.covariance)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Pose covariance is not positive-definite: {exc}") from exc
        mean = belief.mean
        self.t = mean.t + self.deltas[:, POSITION]
        self.v = mean.v + self.deltas[:, VELOCITY]
        self.q = quat_multiply(quat_exp(self.deltas[:, ROTATION]), mean.q.as_array())
        self.omega = mean.omega + self.deltas[:, ANGULAR]
        self.wm = cfg.sigma_points.Wm
        self.wc = cfg.sigma_points.Wc


def average_quaternion(quats: np.ndarray, weights: np.ndarray,
                       initial: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted mean of stacked unit quaternions by iterative error-vector averaging.

    Args:
        quats: Quaternions, shape (m, 4)
        weights: Mean weights, shape (m,), summing to one
        initial: Starting guess, shape (4,)

    Returns:
        Tuple of the mean quaternion and the rotation-vector residuals
        rotvec(q_i ⊗ mean⁻¹), shape (m, 3)
    """
    mean = quat_normalize(initial)
    for _ in range(AVERAGING_MAX_ITERATIONS):
        errors = quat_log(quat_multiply(quats, quat_conjugate(mean)))
        step = weights @ errors
        mean = quat_normalize(quat_multiply(quat_exp(step), mean))
        if np.linalg.norm(step) < AVERAGING_TOLERANCE:
            break
    return mean, quat_log(quat_multiply(quats, quat_conjugate(mean)))


def predict(belief: PoseBelief, cfg: PoseFilterConfig) -> PoseBelief:
    """
    Constant-velocity prediction over one frame.

    Each sigma state moves as t += v·dt and q ← A_q(ω)·q with v and ω held;
    the process noise diag(Q_t, 0, Q_q) is added to the propagated spread.

    Raises:
        NumericalError: If the covariance is not positive-definite
    """
    sigmas = _SigmaSet(belief, cfg)
    t = sigmas.t + sigmas.v * cfg.dt
    q = np.einsum("mij,mj->mi", quat_transition(sigmas.omega, cfg.dt), sigmas.q)
    wm, wc = sigmas.wm, sigmas.wc

    t_mean, v_mean, omega_mean = wm @ t, wm @ sigmas.v, wm @ sigmas.omega
    q_mean, q_residuals = average_quaternion(q, wm, q[0])
    residuals = np.hstack([t - t_mean, sigmas.v - v_mean, q_residuals, sigmas.omega - omega_mean])
    covariance = (residuals.T * wc) @ residuals + cfg.process_noise
    covariance = 0.5 * (covariance + covariance.T)
    mean = PoseState(t_mean, v_mean, UnitQuaternion.from_array(q_mean), omega_mean)
    return PoseBelief(mean, covariance)


def predict_measurement(state: PoseState) -> np.ndarray:
    """
    Measurement map h(x) = [t, q, v + t × ω, ω] as a 13-vector.
    """
    return np.concatenate([
        state.t, state.q.as_array(), state.v + np.cross(state.t, state.omega), state.omega,
    ])


def _unscented_update(belief: PoseBelief, measured: Dict[str, np.ndarray],
                      cfg: PoseFilterConfig) -> PoseBelief:
    """
    Error-space UKF correction with the measurement rows named in measured.

    Rows are "t", "q", "v_o" and "omega"; the "q" row holds a scalar-first
    quaternion and its residual is the rotation vector of q_meas ⊗ q̂⁻¹.
    """
    sigmas = _SigmaSet(belief, cfg)
    wm, wc = sigmas.wm, sigmas.wc
    noise = cfg.measurement_noise
    residual_blocks, innovation_blocks, noise_blocks = [], [], []
    for row in ("t", "q", "v_o", "omega"):
        if row not in measured:
            continue
        if row == "q":
            predicted, residuals = average_quaternion(sigmas.q, wm, sigmas.q[0])
            innovation = quat_log(quat_multiply(measured[row], quat_conjugate(predicted)))
        else:
            if row == "t":
                values = sigmas.t
            elif row == "v_o":
                values = sigmas.v + np.cross(sigmas.t, sigmas.omega)
            else:
                values = sigmas.omega
            predicted = wm @ values
            residuals = values - predicted
            innovation = np.asarray(measured[row], dtype=float) - predicted
        residual_blocks.append(residuals)
        innovation_blocks.append(innovation)
        noise_blocks.append(noise[row])

    residuals = np.hstack(residual_blocks)
    innovation = np.concatenate(innovation_blocks)
    innovation_cov = (residuals.T * wc) @ residuals + linalg.block_diag(*noise_blocks)
    cross_cov = (sigmas.deltas.T * wc) @ residuals
    try:
        gain = linalg.solve(innovation_cov, cross_cov.T, assume_a="pos").T
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Innovation covariance is singular: {exc}") from exc

    mean = belief.mean.boxplus(gain @ innovation)
    covariance = belief.covariance - gain @ innovation_cov @ gain.T
    covariance = 0.5 * (covariance + covariance.T)
    return PoseBelief(mean, covariance)


def update_velocity(belief: PoseBelief, velocity: Twist, cfg: PoseFilterConfig) -> PoseBelief:
    """
    Correct with a velocity measurement V_k = (v_O, ω) only.

    Raises:
        NumericalError: If the innovation covariance is singular
    """
    return _unscented_update(belief, {"v_o": velocity.v_o, "omega": velocity.omega}, cfg)


def update_pose_velocity(belief: PoseBelief, pose: Pose, velocity: Twist,
                         cfg: PoseFilterConfig) -> PoseBelief:
    """
    Correct with a pose measurement T and a velocity measurement V together.

    Raises:
        NumericalError: If the innovation covariance is singular
    """
    return _unscented_update(belief, {
        "t": pose.t, "q": pose.q.as_array(), "v_o": velocity.v_o, "omega": velocity.omega,
    }, cfg)


def update_pose(belief: PoseBelief, pose: Pose, cfg: PoseFilterConfig) -> PoseBelief:
    """
    Correct with a pose measurement only, for runs without velocity measurements.

    Raises:
        NumericalError: If the innovation covariance is singular
    """
    return _unscented_update(belief, {"t": pose.t, "q": pose.q.as_array()}, cfg)


@dataclass
class OutlierGate:
    """
    Vets pose measurements by rendering the object and comparing against measured depth.

    A pose is rejected when including it makes the rendered depth worse than
    the velocity-only estimate by more than gamma meters, when the rendering
    under it barely overlaps the measured depth, or when rendering fails.
    """
    mesh: TriangleMesh
    intr: CameraIntrinsics
    gamma: float
    min_pixels: int = MIN_OVERLAP_PIXELS
    timer: Optional[StageTimer] = None

    def _render(self, with_pose: Pose, without_pose: Pose) -> Tuple[DepthMap, DepthMap]:
        with self.timer.stage("render") if self.timer is not None else nullcontext():
            return render_depth(self.mesh, with_pose, self.intr), render_depth(self.mesh, without_pose, self.intr)

    def accept(self, with_pose: Pose, without_pose: Pose, measured: Optional[DepthMap],
               frame: Optional[int] = None) -> bool:
        """
        Decide whether the estimate including the pose measurement is plausible.

        Args:
            with_pose: Pose estimate after fusing the pose and velocity measurements
            without_pose: Pose estimate after fusing the velocity measurement only
            measured: Depth measured at the pose's origin frame
            frame: Origin frame, for logging

        Returns:
            True when the pose measurement should be kept
        """
        if measured is None:
            logger.warning("Frame %s: no depth to vet the pose measurement, treating it as an outlier", frame)
            return False
        try:
            rendered_with, rendered_without = self._render(with_pose, without_pose)
        except (TrackerError, ValueError) as exc:
            logger.warning("Frame %s: rendering failed (%s), treating the pose as an outlier", frame, exc)
            return False

        region = rendered_with.valid | rendered_without.valid
        error_with = depth_error(rendered_with, measured, region, self.min_pixels)
        if error_with is None:
            logger.info("Frame %s: pose rejected, rendered object misses the measured depth", frame)
            return False
        error_without = depth_error(rendered_without, measured, region, self.min_pixels)
        if error_without is None:
            return True
        accepted = error_with - error_without <= self.gamma
        logger.info("Frame %s: pose %s, depth error %.4f m with pose vs %.4f m without",
                    frame, "accepted" if accepted else "rejected", error_with, error_without)
        return accepted


class PoseFilter:
    """
    Pose filter of one object with delayed-measurement handling.

    Every frame the filter predicts and fuses the velocity measurement V_k,
    then records the prior, the posterior, V_k and the frame's depth. A pose
    measured on an earlier frame rewinds the filter to that frame's prior,
    fuses the pose there (subject to the outlier gate), and replays the
    recorded velocity measurements up to the current frame.
    """

    def __init__(self, cfg: PoseFilterConfig, initial_pose: Pose, first_frame: int = 0,
                 gate: Optional[OutlierGate] = None, depth: Optional[DepthMap] = None,
                 history_capacity: Optional[int] = None):
        """
        Initialize the filter at the first available pose.

        Args:
            cfg: Filter configuration
            initial_pose: Pose seeding the position and orientation
            first_frame: Frame index of the initial pose
            gate: Outlier gate; None accepts every pose
            depth: Depth of the first frame
            history_capacity: Frames kept for rewinding (defaults to delay + 2)
        """
        self.cfg = cfg
        self.gate = gate
        self.belief = PoseBelief.initial(initial_pose, cfg)
        self.frame = first_frame
        self.history = HistoryBuffer(history_capacity or cfg.delay + 2)
        self.history.append(HistoryRecord(first_frame, self.belief, self.belief, None, depth))

    def _velocity_only(self, prior: PoseBelief, velocity: Optional[Twist]) -> PoseBelief:
        return prior if velocity is None else update_velocity(prior, velocity, self.cfg)

    def _with_pose(self, prior: PoseBelief, velocity: Optional[Twist], pose: Pose) -> PoseBelief:
        if velocity is None:
            return update_pose(prior, pose, self.cfg)
        return update_pose_velocity(prior, pose, velocity, self.cfg)

    def step(self, velocity: Optional[Twist], frame: int, depth: Optional[DepthMap] = None,
             poses: Iterable[Tuple[Pose, int]] = ()) -> PoseBelief:
        """
        Advance to frame.

        Args:
            velocity: Velocity measurement V_k, or None to predict only
            frame: Index of the new frame, directly after the current one
            depth: Depth of the new frame, kept for vetting later poses
            poses: Pose measurements that became available at this frame, as
                (pose, origin frame) pairs

        Returns:
            The belief at frame
        """
        prior = predict(self.belief, self.cfg)
        posterior = self._velocity_only(prior, velocity)
        self.history.append(HistoryRecord(frame, prior, posterior, velocity, depth))
        self.frame = frame
        self.belief = posterior
        for pose, origin in poses:
            self.on_pose_measurement(pose, origin)
        return self.belief

    def on_pose_measurement(self, pose: Pose, origin_frame: int,
                            depth: Optional[DepthMap] = None) -> bool:
        """
        Fuse a pose measured on origin_frame and bring the belief back to the current frame.

        Args:
            pose: Delayed pose measurement T^d
            origin_frame: Frame the pose was measured on
            depth: Depth at origin_frame; defaults to the recorded one

        Returns:
            Whether the pose was accepted

        Raises:
            MissingHistoryError: If origin_frame lies after the current frame
        """
        oldest = self.history.oldest_frame
        if oldest is not None and origin_frame < oldest:
            logger.warning("Dropping pose from frame %d: older than the %d-frame history",
                           origin_frame, self.history.capacity)
            return False
        if origin_frame > self.frame:
            raise MissingHistoryError(origin_frame)
        record = self.history.get(origin_frame)

        with_pose = self._with_pose(record.prior, record.velocity, pose)
        without_pose = self._velocity_only(record.prior, record.velocity)
        accepted = True
        if self.gate is not None:
            measured = depth if depth is not None else record.depth
            accepted = self.gate.accept(with_pose.mean.pose, without_pose.mean.pose, measured, origin_frame)

        if accepted:
            self.history.put(replace(record, posterior=with_pose, pose=pose))
            belief = with_pose
        else:
            self.history.put(replace(record, posterior=without_pose, pose=None))
            belief = without_pose
        self.belief = self._replay(origin_frame, belief)
        return accepted

    def _replay(self, origin_frame: int, belief: PoseBelief) -> PoseBelief:
        for record in self.history.since(origin_frame):
            prior = predict(belief, self.cfg)
            if record.pose is not None:
                belief = self._with_pose(prior, record.velocity, record.pose)
            else:
                belief = self._velocity_only(prior, record.velocity)
            self.history.put(replace(record, prior=prior, posterior=belief))
        return belief
