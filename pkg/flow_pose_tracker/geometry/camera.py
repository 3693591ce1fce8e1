"""
Pinhole camera model and the optical-flow jacobian.

Pixels are continuous here: integer pixel (u, v) sits at coordinate (u, v),
and rounding to the pixel grid is left to the mask synchronizer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Pinhole intrinsics in pixels.

    Attributes:
        fx, fy: Focal lengths
        cx, cy: Principal point
        width, height: Image size
    """
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigError(
                f"Principal point ({self.cx}, {self.cy}) outside a {self.width}x{self.height} image"
            )

    @classmethod
    def from_dict(cls, values: dict) -> 'CameraIntrinsics':
        return cls(
            fx=float(values["fx"]), fy=float(values["fy"]),
            cx=float(values["cx"]), cy=float(values["cy"]),
            width=int(values["width"]), height=int(values["height"]),
        )

    def as_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @property
    def shape(self) -> Tuple[int, int]:
        """Image shape as (height, width)."""
        return (self.height, self.width)


def _require_positive_depth(depth: np.ndarray) -> None:
    if not np.all(np.isfinite(depth) & (depth > 0.0)):
        raise DomainError("Depth must be finite and positive")


def project(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """
    Project camera-frame points onto the image plane.

    Args:
        points: Points (x, y, d), shape (3,) or (N, 3)
        intr: Camera intrinsics

    Returns:
        Real-valued pixel coordinates (u, v), shape (2,) or (N, 2); the result
        may lie outside the image

    Raises:
        DomainError: If any depth is not positive
    """
    points = np.asarray(points, dtype=float)
    depth = points[..., 2]
    _require_positive_depth(depth)
    u = intr.cx + points[..., 0] / depth * intr.fx
    v = intr.cy + points[..., 1] / depth * intr.fy
    return np.stack([u, v], axis=-1)


def backproject(u: Union[float, np.ndarray], v: Union[float, np.ndarray],
                depth: Union[float, np.ndarray], intr: CameraIntrinsics) -> np.ndarray:
    """
    Recover the camera-frame point (x, y, d) seen at pixel (u, v) with depth d.

    Raises:
        DomainError: If any depth is not positive
    """
    depth = np.asarray(depth, dtype=float)
    _require_positive_depth(depth)
    x = (np.asarray(u, dtype=float) - intr.cx) * depth / intr.fx
    y = (np.asarray(v, dtype=float) - intr.cy) * depth / intr.fy
    return np.stack(np.broadcast_arrays(x, y, depth), axis=-1)


def flow_jacobian(u: np.ndarray, v: np.ndarray, depth: np.ndarray,
                  intr: CameraIntrinsics, dt: float) -> np.ndarray:
    """
    Stacked jacobians mapping a twist [v_O, ω] to per-frame pixel displacement.

    Row block i is [J_vO  J_ω]·dt for pixel (u[i], v[i]) at depth[i]; the
    ω-block entries follow from differentiating the pinhole model under
    rigid motion ṗ = v_O + ω × p.

    Args:
        u, v: Pixel coordinates, shape (n,)
        depth: Depth of each pixel (meters), shape (n,)
        intr: Camera intrinsics
        dt: Frame period (seconds)

    Returns:
        Jacobians of shape (n, 2, 6)

    Raises:
        DomainError: On non-positive depth or time step
    """
    if not dt > 0.0:
        raise DomainError(f"Time step must be positive, got {dt}")
    depth = np.atleast_1d(np.asarray(depth, dtype=float))
    _require_positive_depth(depth)
    du = np.atleast_1d(np.asarray(u, dtype=float)) - intr.cx
    dv = np.atleast_1d(np.asarray(v, dtype=float)) - intr.cy
    fx, fy = intr.fx, intr.fy
    zeros = np.zeros_like(depth)

    row_u = np.stack([
        fx / depth, zeros, -du / depth,
        -du * dv / fy, (fx * fx + du * du) / fx, -dv * fx / fy,
    ], axis=-1)
    row_v = np.stack([
        zeros, fy / depth, -dv / depth,
        -(fy * fy + dv * dv) / fy, du * dv / fx, du * fy / fx,
    ], axis=-1)
    return np.stack([row_u, row_v], axis=-2) * dt


def flow_jacobian_row(u: float, v: float, depth: float,
                      intr: CameraIntrinsics, dt: float) -> np.ndarray:
    """
    The 2x6 jacobian J_{u,v} of a single pixel, columns ordered (v_O, ω).

    Raises:
        DomainError: On non-positive depth or time step
    """
    return flow_jacobian(np.array([u]), np.array([v]), np.array([depth]), intr, dt)[0]
