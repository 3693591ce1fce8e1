"""
Run configuration.

The committed default.yaml holds every default. load_run_config() merges a
user YAML file and dotted-key overrides on top of it and builds the filter
configuration dataclasses, which validate their own values.
"""
import copy
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import yaml

from ..core.pose_filter import PoseFilterConfig
from ..core.velocity_filter import TwistFilterConfig
from ..errors import ConfigError
from ..utils.validation import require_positive

PathLike = Union[str, Path]

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "default.yaml"

_MATRIX_KEYS = {"q_v": 3, "q_omega": 3, "q_t": 6, "q_q": 3, "r_t": 3, "r_q": 3, "r_v": 3, "r_omega": 3}


@dataclass(frozen=True)
class AblationSwitches:
    """
    Components of the pipeline that can be disabled.

    Attributes:
        use_velocity: Fuse the flow-based velocity measurements
        use_pose: Fuse the delayed pose measurements
        use_mask_sync: Propagate delayed masks with optical flow
        use_pose_sync: Fuse delayed poses at their origin frame by rewinding;
            when False they are fused on arrival as if current
        use_outlier_rejection: Vet pose measurements against measured depth
    """
    use_velocity: bool = True
    use_pose: bool = True
    use_mask_sync: bool = True
    use_pose_sync: bool = True
    use_outlier_rejection: bool = True

    def __post_init__(self):
        if not (self.use_velocity or self.use_pose):
            raise ConfigError("At least one of use_velocity and use_pose must be enabled")


# Ablation matrix: variant name -> switches turned off.
ABLATIONS: Dict[str, Dict[str, bool]] = {
    "full": {},
    "no_mask_sync": {"use_mask_sync": False},
    "no_pose_sync": {"use_pose_sync": False},
    "no_outlier_rejection": {"use_outlier_rejection": False},
    "no_velocity": {"use_velocity": False},
    "no_pose": {"use_pose": False},
}


@dataclass(frozen=True)
class EvaluationConfig:
    model_points: int = 1000
    threshold_max: float = 0.10

    def __post_init__(self):
        if self.model_points < 1:
            raise ConfigError(f"model_points must be positive, got {self.model_points}")
        require_positive("threshold_max", self.threshold_max)


@dataclass(frozen=True)
class OutputPaths:
    estimates: Optional[str] = None
    twists: Optional[str] = None
    overlays: Optional[str] = None


@dataclass(eq=False)
class RunConfig:
    """
    Everything a tracker run needs besides the sequence itself.

    Attributes:
        twist: Velocity filter configuration
        pose: Pose filter configuration, including the pose delay N_p
        switches: Ablation switches
        mask_delay: Mask delay N_s
        frame_rate: Frame rate the filter periods derive from
        evaluation: ADD settings used when ground truth is present
        output: Output paths; None selects the default location or skips the output
        values: The merged configuration tree the dataclasses were built from
    """
    twist: TwistFilterConfig
    pose: PoseFilterConfig
    switches: AblationSwitches = field(default_factory=AblationSwitches)
    mask_delay: int = 6
    frame_rate: float = 30.0
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    output: OutputPaths = field(default_factory=OutputPaths)
    values: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mask_delay < 0:
            raise ConfigError(f"Mask delay must not be negative, got {self.mask_delay}")
        require_positive("frame_rate", self.frame_rate)

    @property
    def max_pixels(self) -> int:
        return self.twist.max_pixels

    @property
    def history_capacity(self) -> int:
        """Frames the pose filter keeps for rewinding."""
        return max(self.mask_delay, self.pose.delay) + 2

    def with_overrides(self, overrides: Iterable[str]) -> 'RunConfig':
        return run_config_from_dict(apply_overrides(self.values, overrides))

    def at_frame_rate(self, frame_rate: float) -> 'RunConfig':
        """The same configuration with the filter periods derived from frame_rate."""
        values = copy.deepcopy(self.values)
        values["frame_rate"] = float(frame_rate)
        return run_config_from_dict(values)

    def ablated(self, variant: str) -> 'RunConfig':
        """
        The configuration of one ablation variant.

        Raises:
            ConfigError: If the variant is unknown
        """
        if variant not in ABLATIONS:
            raise ConfigError(f"Unknown ablation '{variant}', expected one of {sorted(ABLATIONS)}")
        values = copy.deepcopy(self.values)
        values["ablation"].update(ABLATIONS[variant])
        return run_config_from_dict(values)


def _read_yaml(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path) as handle:
            values = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"Cannot read configuration {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise ConfigError(f"Configuration {path} must be a mapping")
    return values


def _merge(base: Dict[str, Any], update: Dict[str, Any], prefix: str = "") -> None:
    for key, value in update.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"Unknown configuration key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Configuration key '{dotted}' must be a mapping")
            _merge(base[key], value, dotted + ".")
        else:
            base[key] = value


def apply_overrides(values: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply "section.key=value" overrides to a configuration tree.

    Values are parsed as YAML scalars or lists, so "true", "0.03" and
    "[1, 2, 3]" keep their types.

    Raises:
        ConfigError: If an override is malformed or names an unknown key
    """
    values = copy.deepcopy(values)
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key:
            raise ConfigError(f"Override '{override}' must have the form key=value")
        try:
            parsed = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Cannot parse the value of override '{override}'") from exc
        update: Dict[str, Any] = {}
        node = update
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
        _merge(values, update)
    return values


def _matrix(name: str, value: Any, size: int) -> np.ndarray:
    """A noise matrix from a scalar (times identity), a diagonal list or a full nested list."""
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return float(array) * np.eye(size)
    if array.ndim == 1:
        if array.shape != (size,):
            raise ConfigError(f"{name} diagonal must have {size} entries, got {array.shape[0]}")
        return np.diag(array)
    return array


def _section(values: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = dict(values.get(name) or {})
    for key, size in _MATRIX_KEYS.items():
        if key in section:
            section[key] = _matrix(f"{name}.{key}", section[key], size)
    return section


def _build(cls, values: Dict[str, Any], name: str):
    known = {item.name for item in fields(cls) if item.init}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"Invalid '{name}' section: {exc}") from exc


def run_config_from_dict(values: Dict[str, Any]) -> RunConfig:
    """
    Build a RunConfig from a complete configuration tree.

    Raises:
        ConfigError: If a value is missing or invalid
    """
    try:
        frame_rate = float(values["frame_rate"])
        mask_delay = int(values["mask_sync"]["delay"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Missing or invalid frame_rate / mask_sync.delay: {exc}") from exc
    require_positive("frame_rate", frame_rate)
    dt = 1.0 / frame_rate

    twist = _build(TwistFilterConfig, {**_section(values, "twist_filter"), "dt": dt}, "twist_filter")
    pose = _build(PoseFilterConfig, {**_section(values, "pose_filter"), "dt": dt}, "pose_filter")
    return RunConfig(
        twist=twist,
        pose=pose,
        switches=_build(AblationSwitches, dict(values.get("ablation") or {}), "ablation"),
        mask_delay=mask_delay,
        frame_rate=frame_rate,
        evaluation=_build(EvaluationConfig, dict(values.get("evaluation") or {}), "evaluation"),
        output=_build(OutputPaths, dict(values.get("output") or {}), "output"),
        values=copy.deepcopy(values),
    )


def load_run_config(path: Optional[PathLike] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Load the run configuration.

    Args:
        path: YAML file whose keys replace the defaults; None uses the defaults only
        overrides: Dotted "section.key=value" overrides applied last

    Returns:
        The validated run configuration

    Raises:
        ConfigError: If a file cannot be read or a value is invalid
    """
    values = _read_yaml(DEFAULT_CONFIG_PATH)
    if path is not None:
        _merge(values, _read_yaml(path))
    return run_config_from_dict(apply_overrides(values, overrides))
