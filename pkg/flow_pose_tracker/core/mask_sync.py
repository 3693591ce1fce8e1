"""
Optical-flow synchronization of delayed segmentation masks.

A segmentation network delivers masks late and at a low rate. Between
deliveries the current mask is carried forward with each new flow frame;
when a delayed mask arrives it is propagated through the buffered flows so
that it describes the current frame.
"""
import logging
from collections import deque
from typing import Deque, Iterable, List, Optional, Tuple

import numpy as np

from ..errors import DimensionMismatchError, FrameOrderError, MissingFlowError
from ..geometry.types import FlowField, Mask

logger = logging.getLogger(__name__)


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties toward +inf."""
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(np.int64)


def propagate_mask(mask: Mask, flow: FlowField) -> Mask:
    """
    Move every mask pixel along its flow vector.

    Each (u, v) lands on round((u, v) + F(u, v)); pixels leaving the image are
    dropped and pixels landing on the same spot merge.

    Args:
        mask: The mask at frame k-1
        flow: The flow F_k from frame k-1 to frame k

    Returns:
        The mask at frame k

    Raises:
        DimensionMismatchError: If mask and flow sizes differ
    """
    if mask.bitmap.shape != flow.data.shape[:2]:
        raise DimensionMismatchError("Flow field", mask.bitmap.shape, flow.data.shape[:2])
    coords = mask.coords()
    displacement = flow.data[coords[:, 1], coords[:, 0]].astype(float)
    moved = round_half_up(coords + displacement)
    frame = flow.frame if flow.frame is not None else mask.frame
    return Mask.from_coords(moved, mask.width, mask.height, frame=frame)


class FlowBuffer:
    """
    Ring buffer of the most recent flow frames, keyed by contiguous frame index.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"Flow buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._entries: Deque[Tuple[int, FlowField]] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def frames(self) -> List[int]:
        return [frame for frame, _ in self._entries]

    def push(self, frame: int, flow: FlowField) -> None:
        """
        Append the flow of a frame.

        Raises:
            FrameOrderError: If frame does not directly follow the newest entry
        """
        if self._entries and frame != self._entries[-1][0] + 1:
            raise FrameOrderError(self._entries[-1][0] + 1, frame)
        self._entries.append((frame, flow))

    def get(self, frame: int) -> FlowField:
        """
        Return the flow of a buffered frame.

        Raises:
            MissingFlowError: If the frame is not buffered
        """
        if not self._entries:
            raise MissingFlowError(frame)
        oldest = self._entries[0][0]
        index = frame - oldest
        if index < 0 or index >= len(self._entries):
            raise MissingFlowError(frame)
        return self._entries[index][1]

    def span(self, first: int, last: int) -> Iterable[FlowField]:
        """Yield the flows of frames first..last inclusive, oldest first."""
        for frame in range(first, last + 1):
            yield self.get(frame)


class MaskSyncState:
    """
    Synchronized mask stream of one tracked object.

    The state owns the current mask M_k, the index of the latest processed
    frame and a FlowBuffer. With synchronize=False the state degrades to
    holding the latest raw delayed mask, which is the "no mask sync" ablation.
    """

    def __init__(self, delay: int, capacity: Optional[int] = None, period: Optional[int] = None,
                 synchronize: bool = True, first_frame: int = 0):
        """
        Initialize the synchronizer.

        Args:
            delay: Nominal mask delay N_s in frames
            capacity: Flow buffer size, at least delay (defaults to delay, minimum 1)
            period: Frames between expected mask deliveries (defaults to the capacity)
            synchronize: Whether delayed masks are propagated with optical flow
            first_frame: Index of the first frame of the stream
        """
        if delay < 0:
            raise ValueError(f"Mask delay must not be negative, got {delay}")
        capacity = max(delay, 1) if capacity is None else capacity
        if capacity < delay:
            raise ValueError(f"Flow buffer capacity {capacity} is smaller than the delay {delay}")
        self.delay = delay
        self.period = capacity if period is None else period
        self.synchronize = synchronize
        self.buffer = FlowBuffer(capacity)
        self.mask: Optional[Mask] = None
        self.frame = first_frame
        self._last_delivery: Optional[int] = None
        self._miss_reported = False

    def advance(self, flow: FlowField) -> Optional[Mask]:
        """
        Step to the next frame with its flow F_k.

        Returns:
            The synchronized mask M_k, or None before the first mask arrived

        Raises:
            FrameOrderError: If flow carries a frame index other than the next one
        """
        frame = self.frame + 1
        if flow.frame is not None and flow.frame != frame:
            raise FrameOrderError(frame, flow.frame)
        self.buffer.push(frame, flow)
        self.frame = frame
        if self.mask is not None and self.synchronize:
            self.mask = propagate_mask(self.mask, flow)
        self._check_missed_delivery()
        return self.mask

    def catch_up(self, delayed_mask: Mask, origin_frame: int) -> Mask:
        """
        Bring a delayed mask up to the current frame.

        The mask belongs to origin_frame; it is propagated through the buffered
        flows of frames origin_frame+1 .. current. The actual gap wins over the
        configured delay when they disagree.

        Args:
            delayed_mask: Mask M^d computed on frame origin_frame
            origin_frame: Frame the mask was computed on

        Returns:
            The synchronized mask M_k, which also replaces the current mask

        Raises:
            FrameOrderError: If origin_frame lies in the future
            MissingFlowError: If a needed flow frame is not buffered
        """
        gap = self.frame - origin_frame
        if gap < 0:
            raise FrameOrderError(self.frame, origin_frame)
        if self._last_delivery is not None and gap != self.delay:
            logger.warning(
                "Mask from frame %d arrived with delay %d at frame %d (configured %d)",
                origin_frame, gap, self.frame, self.delay,
            )
        result = delayed_mask
        if self.synchronize:
            for flow in self.buffer.span(origin_frame + 1, self.frame):
                result = propagate_mask(result, flow)
        self.mask = Mask(result.bitmap, frame=self.frame)
        self._last_delivery = self.frame
        self._miss_reported = False
        return self.mask

    def _check_missed_delivery(self) -> None:
        if self._last_delivery is None or self._miss_reported:
            return
        if self.frame - self._last_delivery > self.period:
            logger.warning(
                "No mask delivered since frame %d; propagating with optical flow only",
                self._last_delivery,
            )
            self._miss_reported = True
