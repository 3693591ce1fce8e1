"""
Rolling per-frame record of the pose filter, used to rewind and replay
when a delayed pose measurement arrives.
"""
from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Iterator, Optional

from ..errors import FrameOrderError, MissingHistoryError
from ..geometry.types import Pose, Twist


@dataclass(frozen=True, eq=False)
class HistoryRecord:
    """
    What the pose filter knew at one frame.

    Attributes:
        frame: Frame index
        prior: Belief after the prediction step, before any correction
        posterior: Belief after all corrections of this frame
        velocity: Velocity measurement V_k fused at this frame, if any
        depth: Depth frame handle used to vet poses that originate here
        pose: Pose measurement accepted at this frame, if any
    """
    frame: int
    prior: Any
    posterior: Any
    velocity: Optional[Twist] = None
    depth: Any = None
    pose: Optional[Pose] = None


class HistoryBuffer:
    """
    Ring buffer of HistoryRecords with contiguous frame indices.
    """

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError(f"History capacity must be at least 2, got {capacity}")
        self.capacity = capacity
        self._records: Deque[HistoryRecord] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[HistoryRecord]:
        return iter(self._records)

    @property
    def oldest_frame(self) -> Optional[int]:
        return self._records[0].frame if self._records else None

    @property
    def newest_frame(self) -> Optional[int]:
        return self._records[-1].frame if self._records else None

    def append(self, record: HistoryRecord) -> None:
        """
        Append the record of the next frame, evicting the oldest when full.

        Raises:
            FrameOrderError: If the record does not directly follow the newest one
        """
        if self._records and record.frame != self._records[-1].frame + 1:
            raise FrameOrderError(self._records[-1].frame + 1, record.frame)
        self._records.append(record)

    def _index(self, frame: int) -> int:
        if not self._records:
            raise MissingHistoryError(frame)
        index = frame - self._records[0].frame
        if index < 0 or index >= len(self._records):
            raise MissingHistoryError(frame)
        return index

    def contains(self, frame: int) -> bool:
        return bool(self._records) and self._records[0].frame <= frame <= self._records[-1].frame

    def get(self, frame: int) -> HistoryRecord:
        """
        Return the record of a frame.

        Raises:
            MissingHistoryError: If the frame is not held
        """
        return self._records[self._index(frame)]

    def put(self, record: HistoryRecord) -> None:
        """Overwrite the record of an already held frame."""
        self._records[self._index(record.frame)] = record

    def since(self, frame: int) -> Iterator[HistoryRecord]:
        """Yield the records after frame, oldest first."""
        start = self._index(frame) + 1
        for index in range(start, len(self._records)):
            yield self._records[index]
