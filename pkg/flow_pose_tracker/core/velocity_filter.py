"""
Linear Kalman filter over the object twist V = [v_O, ω].

The state follows a random walk and is observed through the optical flow of
the pixels of the previous frame's mask, whose displacement is linear in V
(see geometry.camera.flow_jacobian). Flow noise is isotropic, so the update is
carried out in information form: only 6x6 systems are solved, whatever the
number of pixels.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from ..errors import ConfigError, NoMeasurementError, NumericalError
from ..geometry.camera import CameraIntrinsics, flow_jacobian
from ..geometry.types import DepthMap, FlowField, Mask, Twist
from ..utils.validation import require_positive, require_psd

logger = logging.getLogger(__name__)


@dataclass
class TwistFilterConfig:
    """
    Noise model and sampling settings of the twist filter.

    Attributes:
        q_v: Process noise of the linear part (3x3)
        q_omega: Process noise of the angular part (3x3)
        sigma_flow: Flow noise standard deviation in pixels, R_F = sigma_flow² I
        max_pixels: Cap on the number of mask pixels used per update
        dt: Frame period in seconds
        initial_variance: Diagonal of the initial twist covariance
    """
    q_v: np.ndarray = field(default_factory=lambda: 1e-3 * np.eye(3))
    q_omega: np.ndarray = field(default_factory=lambda: 1e-2 * np.eye(3))
    sigma_flow: float = 1.0
    max_pixels: int = 3000
    dt: float = 1.0 / 30.0
    initial_variance: float = 1e2

    def __post_init__(self):
        self.q_v = require_psd("q_v", self.q_v, 3)
        self.q_omega = require_psd("q_omega", self.q_omega, 3)
        require_positive("sigma_flow", self.sigma_flow)
        if self.max_pixels < 100:
            raise ConfigError(f"max_pixels must be at least 100, got {self.max_pixels}")
        require_positive("dt", self.dt)
        require_positive("initial_variance", self.initial_variance)

    @property
    def process_noise(self) -> np.ndarray:
        return linalg.block_diag(self.q_v, self.q_omega)


@dataclass(eq=False)
class TwistBelief:
    """Gaussian belief over the twist."""
    mean: Twist
    covariance: np.ndarray

    @classmethod
    def initial(cls, cfg: TwistFilterConfig, mean: Optional[Twist] = None) -> 'TwistBelief':
        """Zero twist (stationary object) with the configured initial covariance."""
        return cls(mean or Twist.zero(), cfg.initial_variance * np.eye(6))

    def copy(self) -> 'TwistBelief':
        return TwistBelief(self.mean, self.covariance.copy())


def predict(belief: TwistBelief, cfg: TwistFilterConfig) -> TwistBelief:
    """
    Random-walk prediction: the mean is kept and the process noise is added.
    """
    return TwistBelief(belief.mean, belief.covariance + cfg.process_noise)


def build_flow_measurement(flow: FlowField, mask_prev: Mask, depth_prev: DepthMap,
                           intr: CameraIntrinsics,
                           cfg: TwistFilterConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack the flow vectors of the previous mask and their jacobians.

    The mask and depth belong to frame k-1, the frame on which the flow F_k is
    defined. Pixels without valid depth are skipped; masks larger than
    cfg.max_pixels are thinned with a fixed uniform stride.

    Args:
        flow: Optical flow F_k
        mask_prev: Synchronized mask M_{k-1}
        depth_prev: Depth D_{k-1}
        intr: Camera intrinsics
        cfg: Filter configuration

    Returns:
        Tuple (y, J) of the 2n measurement vector and the 2n x 6 jacobian

    Raises:
        NoMeasurementError: If no pixel is retained
    """
    flow.check_size(intr.width, intr.height)
    mask_prev.check_size(intr.width, intr.height)
    depth_prev.check_size(intr.width, intr.height)

    coords = mask_prev.coords()
    if len(coords) > cfg.max_pixels:
        stride = math.ceil(len(coords) / cfg.max_pixels)
        coords = coords[::stride]
    u, v = coords[:, 0], coords[:, 1]
    depth = depth_prev.data[v, u].astype(float)
    valid = np.isfinite(depth) & (depth > 0.0)
    if not valid.any():
        raise NoMeasurementError("No mask pixel with valid depth")
    u, v, depth = u[valid], v[valid], depth[valid]

    y = flow.data[v, u].astype(float).reshape(-1)
    jacobian = flow_jacobian(u, v, depth, intr, cfg.dt).reshape(-1, 6)
    return y, jacobian


def update(belief: TwistBelief, y: np.ndarray, jacobian: np.ndarray,
           cfg: TwistFilterConfig) -> TwistBelief:
    """
    Kalman correction for y = J V + ν, ν ~ N(0, sigma_flow² I), in information form.

    Raises:
        ValueError: If the shapes of y and J disagree
        NumericalError: If the prior or the posterior information matrix is singular
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    jacobian = np.asarray(jacobian, dtype=float)
    if jacobian.shape != (y.size, 6):
        raise ValueError(f"Jacobian shape {jacobian.shape} does not match {y.size} measurements")

    weight = 1.0 / (cfg.sigma_flow ** 2)
    try:
        prior_factor = linalg.cho_factor(belief.covariance)
        prior_information = linalg.cho_solve(prior_factor, np.eye(6))
        information = prior_information + weight * (jacobian.T @ jacobian)
        information_vector = (prior_information @ belief.mean.as_vector()
                              + weight * (jacobian.T @ y))
        posterior_factor = linalg.cho_factor(information)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Twist update is singular: {exc}") from exc

    covariance = linalg.cho_solve(posterior_factor, np.eye(6))
    covariance = 0.5 * (covariance + covariance.T)
    mean = linalg.cho_solve(posterior_factor, information_vector)
    return TwistBelief(Twist.from_vector(mean), covariance)


def step(belief: TwistBelief, flow: FlowField, mask_prev: Optional[Mask],
         depth_prev: Optional[DepthMap], intr: CameraIntrinsics,
         cfg: TwistFilterConfig) -> Tuple[TwistBelief, Twist]:
    """
    One filter cycle for frame k: predict, then correct with the flow F_k.

    The correction is skipped when no pixel is usable (no mask yet, empty
    mask, or no valid depth).

    Returns:
        Tuple of the posterior belief and its mean, the velocity measurement
        V_k handed to the pose filter
    """
    predicted = predict(belief, cfg)
    if mask_prev is None or depth_prev is None or mask_prev.is_empty():
        return predicted, predicted.mean
    try:
        y, jacobian = build_flow_measurement(flow, mask_prev, depth_prev, intr, cfg)
    except NoMeasurementError:
        logger.debug("Frame %s: no usable flow pixels, prediction only", flow.frame)
        return predicted, predicted.mean
    posterior = update(predicted, y, jacobian, cfg)
    return posterior, posterior.mean


class TwistFilter:
    """
    Stateful wrapper tracking the twist of one object across frames.
    """

    def __init__(self, intr: CameraIntrinsics, cfg: TwistFilterConfig):
        self.intr = intr
        self.cfg = cfg
        self.belief = TwistBelief.initial(cfg)

    def step(self, flow: FlowField, mask_prev: Optional[Mask],
             depth_prev: Optional[DepthMap]) -> Twist:
        """Advance to the frame of flow and return the velocity measurement V_k."""
        self.belief, measurement = step(self.belief, flow, mask_prev, depth_prev, self.intr, self.cfg)
        return measurement
