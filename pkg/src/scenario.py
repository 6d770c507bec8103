"""
Scenario files: TOML in, frozen dataclasses out.

A scenario overrides any subset of the defaults below. Unknown keys and bad
values are collected over the whole file and reported together.
"""

# src/scenario.py

import dataclasses
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import tomli_w

from src.contact import ContactParams
from src.control import ControllerGains
from src.errors import ScenarioParseError, ScenarioValidationError
from src.model import GripperParams, ManipulatorParams, ObjectParams, UavParams
from src.presets import PRESETS
from src.simulation import SimConfig
from src.trajectory import TrackingWindow, Waypoint
from utils.output_format import OutputFormat

PLOT_KINDS = ("uav", "manipulator", "gripper", "energy")


@dataclass(frozen=True)
class InitialConfig:
    """Initial hover point; the end-effector starts at its nominal point if unset."""

    uav_position: Tuple[float, float, float] = (0.0, 0.0, -1.0)
    ee_position: Optional[Tuple[float, float, float]] = None


@dataclass(frozen=True)
class TrajectoryConfig:
    max_speed: float = 0.5
    arm_max_speed: float = 0.1
    tracking_blend_time: float = 0.5
    yaw: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "outputs"
    formats: Tuple[str, ...] = (OutputFormat.ALL.value,)
    plots: Tuple[str, ...] = ("uav", "manipulator")
    strict_passivity: bool = False


def _hover_waypoints() -> Tuple[Waypoint, ...]:
    return (Waypoint(0.0, (0.0, 0.0, -1.0)),)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one simulation run needs."""

    name: str = "scenario"
    simulation: SimConfig = field(default_factory=SimConfig)
    uav: UavParams = field(default_factory=UavParams)
    manipulator: ManipulatorParams = field(default_factory=ManipulatorParams)
    gripper: GripperParams = field(default_factory=GripperParams)
    object: ObjectParams = field(default_factory=ObjectParams)
    contact: ContactParams = field(default_factory=ContactParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    initial: InitialConfig = field(default_factory=InitialConfig)
    waypoints: Tuple[Waypoint, ...] = field(default_factory=_hover_waypoints)
    arm_waypoints: Tuple[Waypoint, ...] = ()
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    tracking_windows: Tuple[TrackingWindow, ...] = ()
    output: OutputConfig = field(default_factory=OutputConfig)


# Sections given as TOML arrays of tables
ARRAY_SECTIONS = {
    "waypoints": Waypoint,
    "arm_waypoints": Waypoint,
    "tracking_windows": TrackingWindow,
}


# ================================================
# Dictionary -> dataclasses
# ================================================


def _coerce(value: Any, default: Any, path: str, problems: List[str]) -> Any:
    """Convert a TOML value to the type of `default`, recording mismatches."""
    if is_dataclass(default):
        if not isinstance(value, dict):
            problems.append(f"{path} must be a table")
            return default
        return _build_section(type(default), value, path, problems, default)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append(f"{path} must be true or false (got {value!r})")
            return default
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path} must be an integer (got {value!r})")
            return default
        return value
    if isinstance(default, float) or default is None:
        if default is None and isinstance(value, list):
            return _coerce(value, (0.0, 0.0, 0.0), path, problems)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{path} must be a number (got {value!r})")
            return default
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            problems.append(f"{path} must be a string (got {value!r})")
            return default
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            problems.append(f"{path} must be an array (got {value!r})")
            return default
        if default and isinstance(default[0], tuple):
            return tuple(
                _coerce(row, default[0], f"{path}[{i}]", problems)
                for i, row in enumerate(value)
            )
        if default and isinstance(default[0], str):
            return tuple(
                _coerce(item, "", f"{path}[{i}]", problems)
                for i, item in enumerate(value)
            )
        return tuple(
            _coerce(item, 0.0, f"{path}[{i}]", problems) for i, item in enumerate(value)
        )
    problems.append(f"{path} has an unsupported type")
    return default


def _build_section(
    cls: type,
    data: Dict[str, Any],
    path: str,
    problems: List[str],
    base: Optional[Any] = None,
) -> Any:
    """Build dataclass `cls` from `data` on top of `base` (or the defaults)."""
    base = cls() if base is None else base
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            problems.append(f"unknown key '{key}' in [{path}]")
    changes = {
        name: _coerce(value, getattr(base, name), f"{path}.{name}", problems)
        for name, value in data.items()
        if name in known
    }
    return replace(base, **changes)


def _build_array(
    cls: type, data: Any, path: str, problems: List[str]
) -> Tuple[Any, ...]:
    if not isinstance(data, list):
        problems.append(f"{path} must be an array of tables ([[{path}]])")
        return ()
    items = []
    for i, entry in enumerate(data):
        where = f"{path}[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{where} must be a table")
            continue
        required = [
            f.name for f in fields(cls) if f.default is dataclasses.MISSING
        ]
        missing = [name for name in required if name not in entry]
        if missing:
            problems.append(f"{where} is missing {', '.join(missing)}")
            continue
        # Required fields get typed placeholders to coerce against
        template = cls(**{name: _placeholder(cls, name) for name in required})
        items.append(_build_section(cls, entry, where, problems, template))
    return tuple(items)


def _placeholder(cls: type, name: str) -> Any:
    return (0.0, 0.0, 0.0) if cls is Waypoint and name == "position" else 0.0


def scenario_from_dict(
    data: Dict[str, Any], base: Optional[ScenarioConfig] = None
) -> ScenarioConfig:
    """
    Build and validate a scenario from a parsed TOML document.

    Parameters:
    - data (dict): parsed document
    - base (ScenarioConfig): values the document overrides; defaults if None

    Returns:
    - ScenarioConfig: the validated scenario

    Raises:
    - ScenarioValidationError: listing every problem found
    """
    base = ScenarioConfig() if base is None else base
    problems: List[str] = []
    changes: Dict[str, Any] = {}
    known = {f.name for f in fields(ScenarioConfig)}
    for key, value in data.items():
        if key not in known:
            problems.append(f"unknown key '{key}' at top level")
        elif key in ARRAY_SECTIONS:
            changes[key] = _build_array(ARRAY_SECTIONS[key], value, key, problems)
        else:
            changes[key] = _coerce(value, getattr(base, key), key, problems)
    config = replace(base, **changes)
    if not problems:
        problems = validate_scenario(config)
    if problems:
        raise ScenarioValidationError(problems)
    return config


# ================================================
# Semantic checks
# ================================================


def _waypoint_problems(
    waypoints: Sequence[Waypoint], path: str, required: bool
) -> List[str]:
    found: List[str] = []
    if required and not waypoints:
        found.append(f"{path} needs at least one entry")
    for i, waypoint in enumerate(waypoints):
        if len(waypoint.position) != 3 or not np.all(np.isfinite(waypoint.position)):
            found.append(f"{path}[{i}].position must be three finite numbers")
        if waypoint.time < 0.0:
            found.append(f"{path}[{i}].time must be >= 0")
    for i in range(1, len(waypoints)):
        before, after = waypoints[i - 1].time, waypoints[i].time
        if not after > before:
            found.append(
                f"{path}[{i}].time ({after}) must be after "
                f"{path}[{i - 1}].time ({before})"
            )
    return found


def validate_scenario(config: ScenarioConfig) -> List[str]:
    """Every semantic problem of a scenario; empty when it is runnable."""
    found: List[str] = []
    found += config.simulation.problems()
    found += config.uav.problems()
    found += config.manipulator.problems()
    found += config.gripper.problems()
    found += config.object.problems()
    found += config.contact.problems()
    found += config.gains.problems()

    found += _waypoint_problems(config.waypoints, "waypoints", required=True)
    found += _waypoint_problems(config.arm_waypoints, "arm_waypoints", required=False)
    manipulator = config.manipulator
    for i, waypoint in enumerate(config.arm_waypoints):
        position = np.asarray(waypoint.position, dtype=float)
        if position.shape == (3,) and np.any(
            manipulator.clamp(position) != position
        ):
            found.append(f"arm_waypoints[{i}].position is outside the workspace")

    initial = config.initial
    if len(initial.uav_position) != 3:
        found.append("initial.uav_position needs three entries")
    if initial.ee_position is not None:
        ee = np.asarray(initial.ee_position, dtype=float)
        if ee.shape != (3,) or np.any(manipulator.clamp(ee) != ee):
            found.append("initial.ee_position must lie inside the workspace")

    trajectory = config.trajectory
    if not trajectory.max_speed > 0.0:
        found.append("trajectory.max_speed must be > 0")
    if not trajectory.arm_max_speed > 0.0:
        found.append("trajectory.arm_max_speed must be > 0")
    if not trajectory.tracking_blend_time >= 0.0:
        found.append("trajectory.tracking_blend_time must be >= 0")

    t_end = config.simulation.t_end
    for i, window in enumerate(config.tracking_windows):
        if not 0.0 <= window.t_on < window.t_off <= t_end:
            found.append(
                f"tracking_windows[{i}] needs 0 <= t_on < t_off <= t_end "
                f"(got {window.t_on}, {window.t_off}, t_end {t_end})"
            )

    formats = {f.value for f in OutputFormat}
    for name in config.output.formats:
        if name not in formats:
            found.append(f"output.formats: unknown format {name!r}")
    for name in config.output.plots:
        if name not in PLOT_KINDS:
            found.append(f"output.plots: unknown plot {name!r}")
    return found


# ================================================
# Text and presets
# ================================================

_LOCATION = re.compile(r"line (\d+), column (\d+)")


def parse_scenario(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """
    Parse a TOML scenario.

    :raises ScenarioParseError: on malformed TOML, with line and column.
    :raises ScenarioValidationError: on unknown keys or invalid values.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as error:
        line = getattr(error, "lineno", None)
        column = getattr(error, "colno", None)
        message = getattr(error, "msg", str(error))
        if line is None:
            match = _LOCATION.search(str(error))
            if match:
                line, column = int(match.group(1)), int(match.group(2))
            message = _LOCATION.sub("", str(error)).replace("(at )", "").strip()
        raise ScenarioParseError(message, line, column) from error
    return scenario_from_dict(data, base)


def load_scenario(path: str) -> ScenarioConfig:
    """Read and parse a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as error:
        raise ScenarioParseError(f"cannot read {path}: {error.strerror}") from error
    return parse_scenario(text)


def _plain(value: Any) -> Any:
    """Dataclass tree to TOML-ready builtins; None values are dropped."""
    if is_dataclass(value):
        return {
            f.name: _plain(getattr(value, f.name))
            for f in fields(value)
            if getattr(value, f.name) is not None
        }
    if isinstance(value, (tuple, list)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def serialize_scenario(config: ScenarioConfig) -> str:
    """Write every field of a scenario as TOML; parsing it gives `config` back."""
    document = _plain(config)
    for key in ARRAY_SECTIONS:
        if not document[key]:
            del document[key]
    return tomli_w.dumps(document)


def load_preset(name: str) -> ScenarioConfig:
    """
    Scenario of a built-in preset.

    :raises ScenarioValidationError: when the preset does not exist.
    """
    if name not in PRESETS:
        raise ScenarioValidationError(
            [f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"]
        )
    return scenario_from_dict(PRESETS[name])


def with_overrides(
    config: ScenarioConfig,
    dt: Optional[float] = None,
    t_end: Optional[float] = None,
    out_dir: Optional[str] = None,
    strict_passivity: Optional[bool] = None,
) -> ScenarioConfig:
    """
    Apply command-line overrides and re-validate.

    :raises ScenarioValidationError: if the overrides make the scenario invalid.
    """
    simulation = config.simulation
    if dt is not None:
        simulation = replace(simulation, dt=dt)
    if t_end is not None:
        simulation = replace(simulation, t_end=t_end)
    output = config.output
    if out_dir is not None:
        output = replace(output, out_dir=out_dir)
    if strict_passivity:
        output = replace(output, strict_passivity=True)
    updated = replace(config, simulation=simulation, output=output)
    problems = validate_scenario(updated)
    if problems:
        raise ScenarioValidationError(problems)
    return updated
