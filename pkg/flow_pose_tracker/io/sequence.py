"""
On-disk sequence layout.

A sequence directory holds:

    camera.cfg          YAML intrinsics and fps
    mesh.obj            object mesh (meters)
    depth/NNNNNN.png    16-bit depth in millimeters, one per frame
    flow/NNNNNN.flo     optical flow F_k, one per frame (frame 0 is all zero)
    masks/NNNNNN.png    delayed masks, named by origin frame
    masks.idx           (available, origin) rows for the masks
    poses.csv           delayed pose measurements with provenance
    ground_truth.csv    per-frame pose and velocity, when known

Flow files start with a 12-byte little-endian header (magic, width, height)
followed by width * height (du, dv) float32 pairs in row-major order.
"""
import csv
import logging
import shutil
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import cv2
import numpy as np
import yaml

from ..errors import DataError, DimensionMismatchError, MissingFlowError
from ..geometry.camera import CameraIntrinsics
from ..geometry.types import DepthMap, FlowField, Mask, Pose
from ..rendering.mesh import TriangleMesh, load_mesh, save_mesh
from ..simulation.scene import DelayedMeasurement, SequenceBundle
from .traces import load_pose_stream, write_ground_truth, write_pose_stream

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOW_MAGIC = int.from_bytes(b"FLOW", "little")
FLOW_HEADER_BYTES = 12

CAMERA_FILE = "camera.cfg"
MESH_FILE = "mesh.obj"
MASK_INDEX_FILE = "masks.idx"
POSES_FILE = "poses.csv"
GROUND_TRUTH_FILE = "ground_truth.csv"


def frame_name(frame: int, suffix: str) -> str:
    return f"{frame:06d}{suffix}"


def write_flow(path: PathLike, flow: FlowField) -> None:
    header = np.array([FLOW_MAGIC, flow.width, flow.height], dtype="<u4")
    with open(path, "wb") as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(flow.data, dtype="<f4").tobytes())


def read_flow(path: PathLike, width: int, height: int, frame: Optional[int] = None) -> FlowField:
    """
    Read a flow file and check it against the expected image size.

    Raises:
        DataError: If the file is missing, truncated or not a flow file
        DimensionMismatchError: If the header size differs from width x height
    """
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"Cannot read flow: {exc}", frame=frame, path=str(path)) from exc
    if len(payload) < FLOW_HEADER_BYTES:
        raise DataError("Flow file is shorter than its header", frame=frame, path=str(path))
    magic, file_width, file_height = np.frombuffer(payload[:FLOW_HEADER_BYTES], dtype="<u4")
    if magic != FLOW_MAGIC:
        raise DataError("Not a flow file (bad magic)", frame=frame, path=str(path))
    if (file_width, file_height) != (width, height):
        raise DimensionMismatchError("Flow file", (height, width), (int(file_height), int(file_width)))
    expected = FLOW_HEADER_BYTES + width * height * 2 * 4
    if len(payload) != expected:
        raise DataError(f"Flow file has {len(payload)} bytes, expected {expected}", frame=frame, path=str(path))
    data = np.frombuffer(payload[FLOW_HEADER_BYTES:], dtype="<f4").reshape(height, width, 2)
    return FlowField(data.astype(np.float32), frame)


def write_depth(path: PathLike, depth: DepthMap) -> None:
    if not cv2.imwrite(str(path), depth.to_millimeters()):
        raise DataError("Cannot write depth image", frame=depth.frame, path=str(path))


def read_depth(path: PathLike, frame: Optional[int] = None) -> DepthMap:
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise DataError("Cannot read depth image", frame=frame, path=str(path))
    if image.dtype != np.uint16 or image.ndim != 2:
        raise DataError(f"Depth image must be single-channel 16-bit, got {image.dtype} {image.shape}",
                        frame=frame, path=str(path))
    return DepthMap.from_millimeters(image, frame)


def write_mask(path: PathLike, mask: Mask) -> None:
    if not cv2.imwrite(str(path), mask.bitmap.astype(np.uint8) * 255):
        raise DataError("Cannot write mask image", frame=mask.frame, path=str(path))


def read_mask(path: PathLike, frame: Optional[int] = None) -> Mask:
    image = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if image is None:
        raise DataError("Cannot read mask image", frame=frame, path=str(path))
    return Mask(image > 0, frame)


def write_overlay(path: PathLike, depth: DepthMap, silhouette: Mask) -> None:
    """
    Save a color-mapped depth image with the outline of a projected silhouette.

    Args:
        path: Output PNG
        depth: Measured depth of the frame
        silhouette: Pixels covered by the object rendered at the estimated pose
    """
    valid = depth.valid
    image = np.zeros(depth.data.shape, dtype=np.uint8)
    if valid.any():
        near, far = float(depth.data[valid].min()), float(depth.data[valid].max())
        scaled = (depth.data - near) / max(far - near, 1e-6)
        image[valid] = (255.0 * (1.0 - np.clip(scaled[valid], 0.0, 1.0))).astype(np.uint8)
    canvas = cv2.applyColorMap(image, cv2.COLORMAP_JET)
    canvas[~valid] = 0
    contours, _ = cv2.findContours(silhouette.bitmap.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    cv2.drawContours(canvas, contours, -1, (255, 255, 255), 2)
    if not cv2.imwrite(str(path), canvas):
        raise DataError("Cannot write overlay", frame=depth.frame, path=str(path))


def write_camera(path: PathLike, intr: CameraIntrinsics, fps: float) -> None:
    with open(path, "w") as handle:
        yaml.safe_dump({**intr.as_dict(), "fps": float(fps)}, handle, sort_keys=True)


def read_camera(path: PathLike) -> Tuple[CameraIntrinsics, float]:
    try:
        with open(path) as handle:
            values = yaml.safe_load(handle)
        fps = float(values.pop("fps"))
        return CameraIntrinsics.from_dict(values), fps
    except OSError as exc:
        raise DataError(f"Cannot read camera file: {exc}", path=str(path)) from exc
    except (yaml.YAMLError, AttributeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"Malformed camera file: {exc}", path=str(path)) from exc


def write_sequence(bundle: SequenceBundle, root: PathLike, overwrite: bool = False) -> Path:
    """
    Store a generated bundle in the sequence layout.

    Args:
        bundle: Generated sequence
        root: Target directory
        overwrite: Replace an existing non-empty directory

    Returns:
        The sequence directory

    Raises:
        DataError: If the directory exists and is not empty, or cannot be written
    """
    root = Path(root)
    if root.exists() and any(root.iterdir()):
        if not overwrite:
            raise DataError("Sequence directory is not empty", path=str(root))
        shutil.rmtree(root)
    try:
        for sub in ("depth", "flow", "masks"):
            (root / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"Cannot create sequence directory: {exc}", path=str(root)) from exc

    write_camera(root / CAMERA_FILE, bundle.intr, bundle.fps)
    save_mesh(bundle.mesh, root / MESH_FILE)
    for frame in range(bundle.n_frames):
        write_depth(root / "depth" / frame_name(frame, ".png"), bundle.depths[frame])
        write_flow(root / "flow" / frame_name(frame, ".flo"), bundle.flows[frame])
    with open(root / MASK_INDEX_FILE, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["available", "origin"])
        for entry in bundle.mask_stream:
            write_mask(root / "masks" / frame_name(entry.origin, ".png"), entry.value)
            writer.writerow([entry.available, entry.origin])
    write_pose_stream(root / POSES_FILE, bundle.pose_stream)
    write_ground_truth(root / GROUND_TRUTH_FILE, bundle.poses, bundle.twists)
    logger.info("Wrote %d frames to %s", bundle.n_frames, root)
    return root


class SequenceReader:
    """
    Read access to a sequence directory, frame by frame.

    The per-frame files are read lazily; the camera, the indexes and the
    pose stream are loaded and checked on construction.
    """

    def __init__(self, root: PathLike):
        """
        Raises:
            DataError: If the camera file or an index is malformed, or the
                depth and flow frames are not contiguous from 0
        """
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataError("Sequence directory not found", path=str(self.root))
        self.intr, self.fps = read_camera(self.root / CAMERA_FILE)
        self.n_frames = self._count_frames()
        self._masks = self._read_mask_index()
        self._poses: Dict[int, List[Tuple[Pose, int]]] = {}
        self.pose_stream: List[DelayedMeasurement] = []
        for available, origin, pose, injected in load_pose_stream(self.root / POSES_FILE):
            self._poses.setdefault(available, []).append((pose, origin))
            self.pose_stream.append(DelayedMeasurement(available, origin, pose, injected))
        self._mesh: Optional[TriangleMesh] = None

    def _count_frames(self) -> int:
        depth_frames = sorted(self.root.glob("depth/*.png"))
        if not depth_frames:
            raise DataError("Sequence has no depth frames", path=str(self.root / "depth"))
        for frame, path in enumerate(depth_frames):
            if path.name != frame_name(frame, ".png"):
                raise DataError("Depth frames are not contiguous", frame=frame, path=str(path))
            if not (self.root / "flow" / frame_name(frame, ".flo")).is_file():
                raise MissingFlowError(frame)
        return len(depth_frames)

    def _read_mask_index(self) -> Dict[int, List[int]]:
        path = self.root / MASK_INDEX_FILE
        masks: Dict[int, List[int]] = {}
        try:
            with open(path, newline="") as handle:
                rows = list(csv.DictReader(handle))
        except OSError as exc:
            raise DataError(f"Cannot read mask index: {exc}", path=str(path)) from exc
        for line_number, row in enumerate(rows, start=2):
            try:
                available, origin = int(row["available"]), int(row["origin"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"Malformed mask index row {line_number}", path=str(path)) from exc
            if origin > available:
                raise DataError(f"Mask from frame {origin} available before it was computed",
                                frame=available, path=str(path))
            masks.setdefault(available, []).append(origin)
        return masks

    @property
    def mesh(self) -> TriangleMesh:
        if self._mesh is None:
            self._mesh = load_mesh(self.root / MESH_FILE)
        return self._mesh

    @property
    def ground_truth_path(self) -> Optional[Path]:
        path = self.root / GROUND_TRUTH_FILE
        return path if path.is_file() else None

    @property
    def poses_path(self) -> Path:
        return self.root / POSES_FILE

    def depth_at(self, frame: int) -> DepthMap:
        depth = read_depth(self.root / "depth" / frame_name(frame, ".png"), frame)
        depth.check_size(self.intr.width, self.intr.height)
        return depth

    def flow_at(self, frame: int) -> FlowField:
        return read_flow(self.root / "flow" / frame_name(frame, ".flo"), self.intr.width, self.intr.height, frame)

    def masks_at(self, frame: int) -> List[Tuple[Mask, int]]:
        """Masks delivered at frame, as (mask, origin frame) pairs."""
        delivered = []
        for origin in self._masks.get(frame, []):
            mask = read_mask(self.root / "masks" / frame_name(origin, ".png"), origin)
            mask.check_size(self.intr.width, self.intr.height)
            delivered.append((mask, origin))
        return delivered

    def poses_at(self, frame: int) -> List[Tuple[Pose, int]]:
        """Pose measurements delivered at frame, as (pose, origin frame) pairs."""
        return list(self._poses.get(frame, []))

    def to_bundle(self) -> SequenceBundle:
        """
        Load the whole sequence into memory.

        Ground-truth poses and twists are left empty; the ground truth is
        read through the metrics path instead.
        """
        bundle = SequenceBundle(self.intr, self.fps, self.mesh)
        bundle.depths = [self.depth_at(frame) for frame in range(self.n_frames)]
        bundle.flows = [self.flow_at(frame) for frame in range(self.n_frames)]
        for available in sorted(self._masks):
            for mask, origin in self.masks_at(available):
                bundle.mask_stream.append(DelayedMeasurement(available, origin, mask))
        bundle.pose_stream = list(self.pose_stream)
        return bundle
