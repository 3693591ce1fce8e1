"""
Registry of the RMSE trace metrics reported by evaluations.

Each metric is a class naming the per-frame error it averages and the unit
it is reported in. The registry maps metric names to these classes, so
reports and writers can enumerate the metrics without hard-coding them.
"""
import math
from typing import Callable, Dict, List, Type

import numpy as np

from .pose_metrics import (
    PoseTrace, angular_errors, angular_velocity_errors, rmse, translation_errors, velocity_errors,
)


class TraceMetric:
    """
    Base class for RMSE metrics over aligned traces.

    Subclasses define:

    - metric_name: Key of the metric in reports
    - unit: Unit of the reported value
    - scale: Factor converting the SI per-frame error into unit
    - needs_velocity: Whether the traces must carry velocities
    - per_frame: Function computing the per-frame errors in SI units
    """

    metric_name: str = None
    unit: str = None
    scale: float = 1.0
    needs_velocity: bool = False
    per_frame: Callable[[PoseTrace, PoseTrace], np.ndarray] = None

    @classmethod
    def errors(cls, est: PoseTrace, gt: PoseTrace) -> np.ndarray:
        """Per-frame errors in the metric's unit."""
        return cls.scale * cls.per_frame(est, gt)

    @classmethod
    def compute(cls, est: PoseTrace, gt: PoseTrace) -> float:
        return rmse(cls.errors(est, gt))

    @classmethod
    def applies_to(cls, est: PoseTrace, gt: PoseTrace) -> bool:
        if not cls.needs_velocity:
            return True
        return all(trace.v is not None and trace.omega is not None for trace in (est, gt))


class TranslationRmse(TraceMetric):
    """Cartesian position error e_t."""
    metric_name = "rmse_e_t"
    unit = "cm"
    scale = 100.0
    per_frame = staticmethod(translation_errors)


class AngularRmse(TraceMetric):
    """Geodesic orientation error e_a."""
    metric_name = "rmse_e_a"
    unit = "deg"
    scale = 180.0 / math.pi
    per_frame = staticmethod(angular_errors)


class VelocityRmse(TraceMetric):
    """Linear velocity error e_v."""
    metric_name = "rmse_e_v"
    unit = "cm/s"
    scale = 100.0
    needs_velocity = True
    per_frame = staticmethod(velocity_errors)


class AngularVelocityRmse(TraceMetric):
    """Angular velocity error e_ω."""
    metric_name = "rmse_e_omega"
    unit = "deg/s"
    scale = 180.0 / math.pi
    needs_velocity = True
    per_frame = staticmethod(angular_velocity_errors)


class MetricRegistry:
    """
    Registry of trace metrics, in registration order.
    """

    _metrics: Dict[str, Type[TraceMetric]] = {}

    @classmethod
    def register_metric(cls, metric_class: Type[TraceMetric]) -> None:
        """
        Register a metric class by its name.

        Args:
            metric_class: The metric class to register
        """
        if not metric_class.metric_name:
            raise ValueError("Metric class must have a metric_name attribute")
        cls._metrics[metric_class.metric_name] = metric_class

    @classmethod
    def get_metric_class(cls, metric_name: str) -> Type[TraceMetric]:
        """
        Get the metric class registered under a name.

        Raises:
            ValueError: If the metric is not registered
        """
        metric_class = cls._metrics.get(metric_name)
        if metric_class is None:
            raise ValueError(f"Metric '{metric_name}' is not registered")
        return metric_class

    @classmethod
    def metric_names(cls) -> List[str]:
        return list(cls._metrics)


def register_all_metrics():
    """Register the built-in trace metrics."""
    MetricRegistry.register_metric(TranslationRmse)
    MetricRegistry.register_metric(AngularRmse)
    MetricRegistry.register_metric(VelocityRmse)
    MetricRegistry.register_metric(AngularVelocityRmse)


register_all_metrics()
