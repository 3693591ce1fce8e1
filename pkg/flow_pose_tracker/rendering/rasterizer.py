"""
Software z-buffer depth rasterizer and the depth-error score used to vet
pose measurements.

Pixel (u, v) samples the image plane at coordinate (u, v), the same convention
as geometry.camera.project. Depth is interpolated perspective-correctly, so a
plane renders its exact depth at every covered pixel.
"""
from typing import Optional

import numpy as np

from ..geometry.camera import CameraIntrinsics
from ..geometry.types import DepthMap, Pose, check_shape
from .mesh import TriangleMesh

# Triangles with a vertex closer than this (meters) are culled.
NEAR_PLANE = 1e-4

# Fewest jointly valid pixels for which a depth error is reported.
MIN_OVERLAP_PIXELS = 50


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def render_depth(mesh: TriangleMesh, pose: Pose, intr: CameraIntrinsics) -> DepthMap:
    """
    Render the depth of a mesh placed at pose.

    Both windings are rasterized and the nearest surface wins. Triangles
    reaching behind the near plane are dropped, so a mesh entirely behind the
    camera renders as an all-invalid map.

    Args:
        mesh: Object mesh (object frame)
        pose: Object-in-camera pose
        intr: Camera intrinsics

    Returns:
        Depth map with zeros where no triangle covers the pixel

    Raises:
        ValueError: If the mesh has no triangles
    """
    if mesh.is_empty():
        raise ValueError("Cannot render an empty mesh")
    zbuffer = np.full(intr.shape, np.inf)
    corners = pose.apply(mesh.vertices)[mesh.faces]
    depth = corners[..., 2]
    in_front = np.all(depth > NEAR_PLANE, axis=1)
    corners, depth = corners[in_front], depth[in_front]
    if len(corners) == 0:
        return DepthMap.invalid(intr.width, intr.height)

    us = intr.cx + intr.fx * corners[..., 0] / depth
    vs = intr.cy + intr.fy * corners[..., 1] / depth
    inv_depth = 1.0 / depth

    for (u0, u1, u2), (v0, v1, v2), (w0, w1, w2) in zip(us, vs, inv_depth):
        area = _edge(u0, v0, u1, v1, u2, v2)
        if area == 0.0:
            continue
        left = max(int(np.ceil(min(u0, u1, u2))), 0)
        right = min(int(np.floor(max(u0, u1, u2))), intr.width - 1)
        top = max(int(np.ceil(min(v0, v1, v2))), 0)
        bottom = min(int(np.floor(max(v0, v1, v2))), intr.height - 1)
        if left > right or top > bottom:
            continue

        px, py = np.meshgrid(np.arange(left, right + 1, dtype=float),
                             np.arange(top, bottom + 1, dtype=float))
        b0 = _edge(u1, v1, u2, v2, px, py) / area
        b1 = _edge(u2, v2, u0, v0, px, py) / area
        b2 = 1.0 - b0 - b1
        inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
        if not inside.any():
            continue
        z = 1.0 / (b0 * w0 + b1 * w1 + b2 * w2)
        window = zbuffer[top:bottom + 1, left:right + 1]
        np.minimum(window, np.where(inside, z, np.inf), out=window)

    zbuffer[np.isinf(zbuffer)] = 0.0
    return DepthMap(zbuffer)


def depth_error(rendered: DepthMap, measured: DepthMap,
                region: Optional[np.ndarray] = None,
                min_pixels: int = MIN_OVERLAP_PIXELS) -> Optional[float]:
    """
    Mean absolute depth difference e(D) between a rendered and a measured map.

    Only pixels valid in both maps (and inside region, when given) count.

    Args:
        rendered: Rendered depth
        measured: Measured depth
        region: Optional boolean map restricting the comparison
        min_pixels: Fewest jointly valid pixels for a meaningful score

    Returns:
        The error in meters, or None when fewer than min_pixels pixels overlap

    Raises:
        DimensionMismatchError: If the maps differ in size
    """
    check_shape("Depth map", rendered.data.shape, measured.data.shape)
    joint = rendered.valid & measured.valid
    if region is not None:
        check_shape("Region", rendered.data.shape, np.shape(region))
        joint &= np.asarray(region, dtype=bool)
    count = int(np.count_nonzero(joint))
    if count < min_pixels:
        return None
    difference = rendered.data[joint].astype(float) - measured.data[joint].astype(float)
    return float(np.mean(np.abs(difference)))
