"""
Exception hierarchy for flow-pose-tracker.

Every exception raised deliberately by the package derives from TrackerError,
so callers (the CLI in particular) can map failures to exit codes.
"""
from typing import Optional, Tuple


class TrackerError(Exception):
    """Base class for all errors raised by the tracker."""


class DomainError(TrackerError, ValueError):
    """
    Raised when a geometric precondition is violated.

    Typical causes are a non-positive depth or a non-positive time step.
    """


class DimensionMismatchError(TrackerError, ValueError):
    """
    Raised when two image-plane quantities disagree in size.
    """

    def __init__(self, what: str, expected: Tuple[int, ...], actual: Tuple[int, ...]):
        """
        Initialize the exception.

        Args:
            what: Description of the mismatching quantity
            expected: The expected shape
            actual: The shape that was provided
        """
        super().__init__(f"{what}: expected shape {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class FrameOrderError(TrackerError, ValueError):
    """
    Raised when frames are not delivered with contiguous indices.
    """

    def __init__(self, expected: int, actual: int):
        super().__init__(f"Expected frame {expected}, got frame {actual}")
        self.expected = expected
        self.actual = actual


class MissingFlowError(TrackerError, LookupError):
    """
    Raised when a flow frame needed for mask catch-up is not buffered.
    """

    def __init__(self, frame: int):
        super().__init__(f"Flow for frame {frame} is not in the flow buffer")
        self.frame = frame


class MissingHistoryError(TrackerError, LookupError):
    """
    Raised when a filter rewind targets a frame that is not in the history.
    """

    def __init__(self, frame: int):
        super().__init__(f"No history record for frame {frame}")
        self.frame = frame


class NoMeasurementError(TrackerError):
    """
    Raised when a flow measurement has no usable pixels.

    The velocity filter treats this as a signal to skip its update.
    """


class NumericalError(TrackerError, ArithmeticError):
    """
    Raised on singular systems or covariances that lost positive-definiteness.
    """


class ConfigError(TrackerError, ValueError):
    """
    Raised when a configuration value violates its invariants.
    """


class DataError(TrackerError, ValueError):
    """
    Raised when a sequence on disk is malformed.
    """

    def __init__(self, message: str, frame: Optional[int] = None, path: Optional[str] = None):
        """
        Initialize the exception.

        Args:
            message: Description of the problem
            frame: The offending frame index, if known
            path: The offending file, if known
        """
        location = []
        if frame is not None:
            location.append(f"frame {frame}")
        if path is not None:
            location.append(path)
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.frame = frame
        self.path = path
