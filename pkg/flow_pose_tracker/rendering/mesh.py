"""
Triangle meshes of tracked objects.

Meshes are stored in a plain-text subset of the Wavefront OBJ format: "v x y z"
vertex records and "f i j k" face records with 1-based indices. Coordinates are
in meters in the object frame; files authored in millimeters must be scaled
before loading (see load_mesh's scale argument).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..errors import DataError

logger = logging.getLogger(__name__)

# Triangles with a smaller area (m²) are treated as degenerate.
MIN_TRIANGLE_AREA = 1e-12

PathLike = Union[str, Path]


@dataclass(eq=False)
class TriangleMesh:
    """
    Indexed triangle mesh.

    Attributes:
        vertices: Vertex positions, shape (n, 3), meters, object frame
        faces: Vertex indices of each triangle, shape (m, 3), 0-based
    """
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise DataError(f"Face index out of range for {len(self.vertices)} vertices")
        areas = self.areas()
        keep = areas > MIN_TRIANGLE_AREA
        if not keep.all():
            logger.debug("Dropping %d degenerate triangles", int(np.count_nonzero(~keep)))
            self.faces = self.faces[keep]

    @property
    def triangles(self) -> np.ndarray:
        """Corner positions of every triangle, shape (m, 3, 3)."""
        return self.vertices[self.faces]

    def areas(self) -> np.ndarray:
        corners = self.vertices[self.faces]
        cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=-1)

    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (min corner, max corner)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def load_mesh(path: PathLike, scale: float = 1.0) -> TriangleMesh:
    """
    Read a mesh from the OBJ text subset.

    Only vertex and face records are read; texture and normal references in
    face records ("f 1/1/1 ...") are ignored, and polygons are fan-triangulated.

    Args:
        path: Mesh file
        scale: Factor applied to the coordinates, e.g. 0.001 for millimeter files

    Returns:
        The mesh in meters

    Raises:
        DataError: If a record is malformed or the mesh has no triangles
    """
    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    with open(path, "r") as f:
        for line_number, line in enumerate(f, start=1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            try:
                if fields[0] == "v":
                    vertices.append([float(value) * scale for value in fields[1:4]])
                    if len(vertices[-1]) != 3:
                        raise ValueError("vertex needs three coordinates")
                elif fields[0] == "f":
                    corners = [int(field.split("/")[0]) - 1 for field in fields[1:]]
                    if len(corners) < 3:
                        raise ValueError("face needs at least three vertices")
                    for i in range(1, len(corners) - 1):
                        faces.append([corners[0], corners[i], corners[i + 1]])
            except ValueError as exc:
                raise DataError(f"Malformed mesh record on line {line_number}: {exc}", path=str(path))

    mesh = TriangleMesh(np.array(vertices, dtype=float), np.array(faces, dtype=np.int64))
    if mesh.is_empty():
        raise DataError("Mesh has no triangles", path=str(path))
    return mesh


def save_mesh(mesh: TriangleMesh, path: PathLike) -> None:
    """Write a mesh in the OBJ text subset (meters, 1-based faces)."""
    with open(path, "w") as f:
        f.write("# units: meters\n")
        for x, y, z in mesh.vertices:
            f.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for i, j, k in mesh.faces + 1:
            f.write(f"f {i} {j} {k}\n")


def box_mesh(size: Tuple[float, float, float] = (0.10, 0.16, 0.21)) -> TriangleMesh:
    """
    Closed axis-aligned box centered at the origin.

    The default size is that of a cereal-style cracker box.
    """
    half = np.asarray(size, dtype=float) / 2.0
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    vertices = signs * half
    # Quads as vertex indices into the (sx, sy, sz) enumeration above, wound outward.
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # -x, +x
        (0, 4, 5, 1), (2, 3, 7, 6),  # -y, +y
        (0, 2, 6, 4), (1, 5, 7, 3),  # -z, +z
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return TriangleMesh(vertices, np.array(faces))


def cylinder_mesh(radius: float = 0.035, height: float = 0.10, segments: int = 32) -> TriangleMesh:
    """Closed cylinder around the z axis, centered at the origin."""
    if segments < 3:
        raise ValueError(f"A cylinder needs at least 3 segments, got {segments}")
    angles = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -height / 2.0)])
    top = np.column_stack([ring, np.full(segments, height / 2.0)])
    centers = np.array([[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]])
    vertices = np.vstack([bottom, top, centers])
    bottom_center, top_center = 2 * segments, 2 * segments + 1

    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((i, j, segments + j))
        faces.append((i, segments + j, segments + i))
        faces.append((bottom_center, j, i))
        faces.append((top_center, segments + i, segments + j))
    return TriangleMesh(vertices, np.array(faces))


def sample_surface_points(mesh: TriangleMesh, count: int, seed: Optional[int] = 0) -> np.ndarray:
    """
    Draw points uniformly over the mesh surface.

    Args:
        mesh: Source mesh
        count: Number of points
        seed: Random seed; the same seed gives the same points

    Returns:
        Points of shape (count, 3), object frame
    """
    if count < 1:
        raise ValueError(f"Point count must be positive, got {count}")
    if mesh.is_empty():
        raise DataError("Cannot sample points on an empty mesh")
    rng = np.random.default_rng(seed)
    areas = mesh.areas()
    chosen = rng.choice(len(areas), size=count, p=areas / areas.sum())
    corners = mesh.triangles[chosen]
    r1 = np.sqrt(rng.random(count))[:, None]
    r2 = rng.random(count)[:, None]
    return ((1.0 - r1) * corners[:, 0]
            + r1 * (1.0 - r2) * corners[:, 1]
            + r1 * r2 * corners[:, 2])
