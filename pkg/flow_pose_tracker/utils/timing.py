"""
Wall-clock timing of the tracker stages.
"""
import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Dict, Iterator

logger = logging.getLogger(__name__)

# Disjoint per-frame stages; render is timed inside pose_ukf.
TOP_LEVEL_STAGES = ("mask_sync", "velocity_kf", "pose_ukf")


class StageTimer:
    """
    Accumulates the time spent per stage and the number of processed frames.

    Stages may nest; an inner stage's time is also counted in the outer one
    (render runs inside pose_ukf).
    """

    def __init__(self):
        self._totals: Dict[str, float] = defaultdict(float)
        self._calls: Dict[str, int] = defaultdict(int)
        self.frames = 0

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self._totals[name] += time.perf_counter() - start
            self._calls[name] += 1

    def frame_done(self) -> None:
        self.frames += 1

    def total(self, name: str) -> float:
        """Seconds spent in a stage."""
        return self._totals.get(name, 0.0)

    def mean_ms_per_frame(self) -> Dict[str, float]:
        """Milliseconds per processed frame, by stage."""
        if self.frames == 0:
            return {}
        return {name: 1e3 * total / self.frames for name, total in self._totals.items()}

    @property
    def fps(self) -> float:
        """Frames per second of the top-level stages."""
        busy = sum(self._totals.get(name, 0.0) for name in TOP_LEVEL_STAGES)
        return self.frames / busy if busy > 0 else float("inf")

    def log_summary(self) -> None:
        if self.frames == 0:
            return
        per_stage = ", ".join(f"{name} {ms:.2f} ms" for name, ms in sorted(self.mean_ms_per_frame().items()))
        logger.info("Processed %d frames at %.1f fps (%s)", self.frames, self.fps, per_stage)
