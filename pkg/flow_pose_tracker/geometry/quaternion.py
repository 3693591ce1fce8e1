"""
Quaternion primitives for the tracker.

Quaternions are stored scalar-first, [w, x, y, z], and compose with the
Hamilton product. The array helpers operate on stacked quaternions of shape
(..., 4) so the filters can push whole sigma-point sets through them at once;
UnitQuaternion is the value type used at the public API.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..errors import DomainError

# Below this rotation angle the closed-form exponential switches to its Taylor expansion.
SMALL_ANGLE = 1e-8

ArrayLike = Union[Sequence[float], np.ndarray]


def quat_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """
    Hamilton product p ⊗ q of (stacked) scalar-first quaternions.

    Args:
        p: Left operand, shape (..., 4)
        q: Right operand, shape (..., 4)

    Returns:
        The product, shape broadcast from the inputs
    """
    pw, px, py, pz = np.moveaxis(np.asarray(p, dtype=float), -1, 0)
    qw, qx, qy, qz = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    """Conjugate (inverse for unit quaternions) of stacked quaternions."""
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize stacked quaternions to unit length."""
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_exp(rotvec: np.ndarray) -> np.ndarray:
    """
    Map rotation vectors to unit quaternions.

    Args:
        rotvec: Rotation vectors (axis times angle in radians), shape (..., 3)

    Returns:
        Unit quaternions, shape (..., 4)
    """
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    small = angle < SMALL_ANGLE
    safe = np.where(small, 1.0, angle)
    half = 0.5 * angle
    w = np.where(small, 1.0 - angle ** 2 / 8.0, np.cos(half))
    scale = np.where(small, 0.5 - angle ** 2 / 48.0, np.sin(half) / safe)
    return np.concatenate([w, scale * rotvec], axis=-1)


def quat_log(q: np.ndarray) -> np.ndarray:
    """
    Map unit quaternions to rotation vectors in the ball of radius π.

    q and -q give the same result.

    Args:
        q: Unit quaternions, shape (..., 4)

    Returns:
        Rotation vectors, shape (..., 3)
    """
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0.0, -q, q)
    w = q[..., :1]
    vec = q[..., 1:]
    vec_norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    small = vec_norm < SMALL_ANGLE
    angle = 2.0 * np.arctan2(vec_norm, w)
    scale = np.where(small, 2.0 / np.where(w == 0.0, 1.0, w), angle / np.where(small, 1.0, vec_norm))
    return scale * vec


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices, shape (..., 3, 3), of stacked unit quaternions."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def left_multiplication_matrix(p: np.ndarray) -> np.ndarray:
    """
    The 4x4 matrices L(p) with L(p) @ q == p ⊗ q.

    Args:
        p: Quaternions, shape (..., 4)

    Returns:
        Left-multiplication matrices, shape (..., 4, 4)
    """
    w, x, y, z = np.moveaxis(np.asarray(p, dtype=float), -1, 0)
    return np.stack([
        np.stack([w, -x, -y, -z], axis=-1),
        np.stack([x, w, -z, y], axis=-1),
        np.stack([y, z, w, -x], axis=-1),
        np.stack([z, -y, x, w], axis=-1),
    ], axis=-2)


@dataclass(frozen=True, eq=False)
class UnitQuaternion:
    """
    Unit quaternion, scalar-first.

    The components are renormalized on construction, so every instance
    satisfies |q| = 1 to machine precision.
    """
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        norm = float(np.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("Quaternion must have a finite, non-zero norm")
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)) / norm)

    @classmethod
    def identity(cls) -> 'UnitQuaternion':
        """Return the identity rotation."""
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: ArrayLike) -> 'UnitQuaternion':
        """Create a quaternion from a scalar-first 4-vector."""
        w, x, y, z = np.asarray(values, dtype=float).reshape(4)
        return cls(w, x, y, z)

    @classmethod
    def from_rotvec(cls, rotvec: ArrayLike) -> 'UnitQuaternion':
        """Create a quaternion from a rotation vector (radians)."""
        return cls.from_array(quat_exp(np.asarray(rotvec, dtype=float).reshape(3)))

    @classmethod
    def from_axis_angle(cls, axis: ArrayLike, angle: float) -> 'UnitQuaternion':
        """Create a quaternion rotating by angle radians about axis."""
        axis = np.asarray(axis, dtype=float).reshape(3)
        return cls.from_rotvec(axis / np.linalg.norm(axis) * angle)

    def as_array(self) -> np.ndarray:
        """Return the scalar-first components as a 4-vector."""
        return np.array([self.w, self.x, self.y, self.z])

    def as_rotvec(self) -> np.ndarray:
        """Return the rotation vector of this rotation."""
        return quat_log(self.as_array())

    def as_matrix(self) -> np.ndarray:
        """Return the 3x3 rotation matrix."""
        return quat_to_matrix(self.as_array())

    def conjugate(self) -> 'UnitQuaternion':
        """Return the inverse rotation."""
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate

    def __mul__(self, other: 'UnitQuaternion') -> 'UnitQuaternion':
        return UnitQuaternion.from_array(quat_multiply(self.as_array(), other.as_array()))

    def __neg__(self) -> 'UnitQuaternion':
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate vectors of shape (3,) or (N, 3)."""
        return np.asarray(vectors, dtype=float) @ self.as_matrix().T

    def __repr__(self) -> str:
        return f"UnitQuaternion(w={self.w:.9f}, x={self.x:.9f}, y={self.y:.9f}, z={self.z:.9f})"


def quat_transition(omega: ArrayLike, dt: float) -> np.ndarray:
    """
    Quaternion kinematics transition matrix A_q(ω).

    q_k = A_q(ω) @ q_{k-1} rotates q_{k-1} by |ω|·dt about ω/|ω| (angular
    velocity expressed in the camera frame, so the increment multiplies from
    the left). The exponential is evaluated in closed form, which keeps the
    result unit-norm at any rotation rate.

    Args:
        omega: Angular velocity (rad/s), shape (3,) or stacked (..., 3)
        dt: Time step (s)

    Returns:
        The 4x4 transition matrix, or a stack of them

    Raises:
        DomainError: If dt is not positive
    """
    if not dt > 0.0:
        raise DomainError(f"Time step must be positive, got {dt}")
    increment = quat_exp(np.asarray(omega, dtype=float) * dt)
    return left_multiplication_matrix(increment)


def geodesic_angle(q1: UnitQuaternion, q2: UnitQuaternion) -> float:
    """
    Angle (radians) of the relative rotation between two orientations.

    Symmetric and invariant to the sign of either quaternion.
    """
    return float(geodesic_angles(q1.as_array(), q2.as_array()))


def geodesic_angles(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Vectorized geodesic_angle over stacked quaternions of shape (..., 4)."""
    relative = quat_multiply(quat_conjugate(q1), q2)
    vec_norm = np.linalg.norm(relative[..., 1:], axis=-1)
    return 2.0 * np.arctan2(vec_norm, np.abs(relative[..., 0]))
