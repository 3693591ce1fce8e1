"""
Value types shared by all tracker stages.

Poses are object-in-camera: Pose.apply maps object-frame points into the
camera frame. Image-plane quantities are indexed [row, column] = [v, u].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..errors import DimensionMismatchError
from .quaternion import UnitQuaternion


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid transform of the object in the camera frame.

    Attributes:
        t: Translation in meters
        q: Object-to-camera rotation
    """
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: UnitQuaternion = field(default_factory=UnitQuaternion.identity)

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3).copy())

    @classmethod
    def identity(cls) -> 'Pose':
        return cls()

    @classmethod
    def from_array(cls, values: np.ndarray) -> 'Pose':
        """Create a pose from [tx, ty, tz, qw, qx, qy, qz]."""
        values = np.asarray(values, dtype=float).reshape(7)
        return cls(values[:3], UnitQuaternion.from_array(values[3:]))

    def as_array(self) -> np.ndarray:
        """Return [tx, ty, tz, qw, qx, qy, qz]."""
        return np.concatenate([self.t, self.q.as_array()])

    @property
    def rotation(self) -> np.ndarray:
        return self.q.as_matrix()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform object-frame points of shape (3,) or (N, 3) into the camera frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.t

    def inverse(self) -> 'Pose':
        q_inv = self.q.conjugate()
        return Pose(-q_inv.rotate(self.t), q_inv)

    def compose(self, other: 'Pose') -> 'Pose':
        """Return self ∘ other (apply other first)."""
        return Pose(self.apply(other.t), self.q * other.q)


@dataclass(frozen=True, eq=False)
class Twist:
    """
    6D velocity of the tracked object.

    Attributes:
        v_o: Velocity (m/s) of the object-fixed point instantaneously at the camera origin
        omega: Angular velocity (rad/s), camera frame
    """
    v_o: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        v_o = np.asarray(self.v_o, dtype=float).reshape(3).copy()
        omega = np.asarray(self.omega, dtype=float).reshape(3).copy()
        if not (np.all(np.isfinite(v_o)) and np.all(np.isfinite(omega))):
            raise ValueError("Twist components must be finite")
        object.__setattr__(self, "v_o", v_o)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def zero(cls) -> 'Twist':
        return cls()

    @classmethod
    def from_vector(cls, values: np.ndarray) -> 'Twist':
        """Create a twist from the stacked 6-vector [v_o, omega]."""
        values = np.asarray(values, dtype=float).reshape(6)
        return cls(values[:3], values[3:])

    @classmethod
    def from_origin_velocity(cls, t: np.ndarray, v: np.ndarray, omega: np.ndarray) -> 'Twist':
        """Twist of an object whose origin sits at t and moves with velocity v."""
        t = np.asarray(t, dtype=float)
        omega = np.asarray(omega, dtype=float)
        return cls(np.asarray(v, dtype=float) + np.cross(t, omega), omega)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v_o, self.omega])

    def point_velocity(self, points: np.ndarray) -> np.ndarray:
        """Velocity of object points (camera frame), shape (3,) or (N, 3)."""
        return self.v_o + np.cross(self.omega, np.asarray(points, dtype=float))


def check_shape(what: str, expected: Tuple[int, ...], actual: Tuple[int, ...]) -> None:
    if tuple(expected) != tuple(actual):
        raise DimensionMismatchError(what, tuple(expected), tuple(actual))


@dataclass(eq=False)
class FlowField:
    """
    Dense optical flow F_k in pixels per frame.

    data[v, u] is the displacement of pixel (u, v) of frame k-1 toward frame k.
    """
    data: np.ndarray
    frame: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 2:
            raise DimensionMismatchError("Flow field", (-1, -1, 2), self.data.shape)

    @classmethod
    def zeros(cls, width: int, height: int, frame: Optional[int] = None) -> 'FlowField':
        return cls(np.zeros((height, width, 2), dtype=np.float32), frame)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def check_size(self, width: int, height: int) -> None:
        check_shape("Flow field", (height, width), self.data.shape[:2])


@dataclass(eq=False)
class DepthMap:
    """
    Dense depth in meters; zero or non-finite entries are invalid.
    """
    data: np.ndarray
    frame: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise DimensionMismatchError("Depth map", (-1, -1), self.data.shape)

    @classmethod
    def invalid(cls, width: int, height: int, frame: Optional[int] = None) -> 'DepthMap':
        return cls(np.zeros((height, width), dtype=np.float32), frame)

    @classmethod
    def from_millimeters(cls, millimeters: np.ndarray, frame: Optional[int] = None) -> 'DepthMap':
        """Depth from integer millimeters, the storage unit of depth images."""
        return cls((np.asarray(millimeters, dtype=np.float64) * 1e-3).astype(np.float32), frame)

    def to_millimeters(self) -> np.ndarray:
        """Depth as uint16 millimeters; invalid entries become 0."""
        millimeters = np.where(self.valid, np.round(self.data.astype(np.float64) * 1e3), 0.0)
        return np.clip(millimeters, 0, np.iinfo(np.uint16).max).astype(np.uint16)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def valid(self) -> np.ndarray:
        """Boolean map of valid depth entries."""
        return np.isfinite(self.data) & (self.data > 0.0)

    def check_size(self, width: int, height: int) -> None:
        check_shape("Depth map", (height, width), self.data.shape)


class Mask:
    """
    Set of object pixels.

    A mask is stored as a boolean bitmap; the coordinate-list view is derived
    from it in row-major order, so both views always agree and the list never
    holds duplicates.
    """

    def __init__(self, bitmap: np.ndarray, frame: Optional[int] = None):
        bitmap = np.asarray(bitmap)
        if bitmap.ndim != 2:
            raise DimensionMismatchError("Mask", (-1, -1), bitmap.shape)
        self.bitmap = bitmap.astype(bool, copy=True)
        self.frame = frame

    @classmethod
    def empty(cls, width: int, height: int, frame: Optional[int] = None) -> 'Mask':
        return cls(np.zeros((height, width), dtype=bool), frame)

    @classmethod
    def from_coords(cls, coords: np.ndarray, width: int, height: int,
                    frame: Optional[int] = None) -> 'Mask':
        """
        Build a mask from integer (u, v) coordinates.

        Coordinates outside the image are discarded and duplicates collapse.
        """
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        inside = ((coords[:, 0] >= 0) & (coords[:, 0] < width)
                  & (coords[:, 1] >= 0) & (coords[:, 1] < height))
        coords = coords[inside]
        bitmap = np.zeros((height, width), dtype=bool)
        bitmap[coords[:, 1], coords[:, 0]] = True
        return cls(bitmap, frame)

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]

    def coords(self) -> np.ndarray:
        """Return the (n, 2) integer array of (u, v) coordinates, row-major."""
        rows, cols = np.nonzero(self.bitmap)
        return np.stack([cols, rows], axis=1)

    def __len__(self) -> int:
        return int(np.count_nonzero(self.bitmap))

    def is_empty(self) -> bool:
        return not self.bitmap.any()

    def check_size(self, width: int, height: int) -> None:
        check_shape("Mask", (height, width), self.bitmap.shape)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return self.bitmap.shape == other.bitmap.shape and bool(np.array_equal(self.bitmap, other.bitmap))

    def __repr__(self) -> str:
        return f"Mask({self.width}x{self.height}, pixels={len(self)}, frame={self.frame})"


def mask_iou(a: Mask, b: Mask) -> float:
    """
    Intersection over union of two masks; two empty masks have IoU 1.
    """
    check_shape("Mask", a.bitmap.shape, b.bitmap.shape)
    union = np.count_nonzero(a.bitmap | b.bitmap)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(a.bitmap & b.bitmap)) / float(union)
