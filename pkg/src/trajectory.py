"""
Setpoint generation: rate-limited waypoints and the object-tracking gate.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from src.control import Setpoints, object_tracking_setpoint
from src.spatial_math import Pose, Vector

if TYPE_CHECKING:
    from src.scenario import ScenarioConfig


@dataclass(frozen=True)
class Waypoint:
    """Reach `position` at `time`; a step waypoint jumps there instead of ramping."""

    time: float
    position: Tuple[float, float, float]
    step: bool = False


@dataclass(frozen=True)
class TrackingWindow:
    t_on: float
    t_off: float


@dataclass(frozen=True)
class Segment:
    depart: float
    arrive: float
    start: Vector
    end: Vector


def waypoint_schedule(
    waypoints: Sequence[Waypoint], max_speed: float
) -> Tuple[Vector, List[Segment]]:
    """
    Turn waypoints into ramps that never exceed `max_speed`.

    A ramp leaves when its previous waypoint time has passed and the previous
    ramp has arrived; it lasts at least the distance over the speed limit, so
    late waypoints are reached late rather than faster.

    :return: (initial position, segments in time order).
    """
    if not waypoints:
        raise ValueError("at least one waypoint is required")
    position = np.asarray(waypoints[0].position, dtype=float)
    initial = position
    arrive = waypoints[0].time
    previous_time = waypoints[0].time
    segments = []
    for waypoint in waypoints[1:]:
        target = np.asarray(waypoint.position, dtype=float)
        if waypoint.step:
            depart = max(waypoint.time, arrive)
            end_time = depart
        else:
            depart = max(previous_time, arrive)
            distance = float(np.linalg.norm(target - position))
            end_time = depart + max(waypoint.time - depart, distance / max_speed)
        segments.append(Segment(depart, end_time, position, target))
        position = target
        arrive = end_time
        previous_time = waypoint.time
    return initial, segments


def interpolate_waypoints(
    waypoints: Sequence[Waypoint], t: float, max_speed: float
) -> Vector:
    """Setpoint at time t: held before and after the ramps, linear in between."""
    position, segments = waypoint_schedule(waypoints, max_speed)
    for segment in segments:
        if t < segment.depart:
            return position
        if t < segment.arrive:
            alpha = (t - segment.depart) / (segment.arrive - segment.depart)
            return segment.start + alpha * (segment.end - segment.start)
        position = segment.end
    return position


def tracking_blend(
    windows: Sequence[TrackingWindow], t: float, blend_time: float
) -> float:
    """
    Weight of the object-tracking setpoint at time t.

    Ramps linearly from 0 to 1 over `blend_time` after t_on and back to 0
    after t_off.
    """
    weight = 0.0
    for window in windows:
        if blend_time <= 0.0:
            inside = window.t_on <= t < window.t_off
            weight = max(weight, 1.0 if inside else 0.0)
            continue
        rise = np.clip((t - window.t_on) / blend_time, 0.0, 1.0)
        fall = np.clip((t - window.t_off) / blend_time, 0.0, 1.0)
        weight = max(weight, float(rise - fall))
    return weight


def generate_setpoints(
    config: "ScenarioConfig",
    t: float,
    uav_pose: Optional[Pose] = None,
    object_pose: Optional[Pose] = None,
) -> Setpoints:
    """
    Setpoints of the three controllers at time t.

    Parameters:
    - config (ScenarioConfig): scenario with waypoints and tracking windows
    - t (float): simulation time (s)
    - uav_pose (Pose): measured UAV pose; the UAV setpoint, level, if omitted
    - object_pose (Pose): object pose estimate; the true wall pose if omitted

    Returns:
    - Setpoints: UAV and end-effector setpoints, the grasp aperture and the
      tracking flags
    """
    trajectory = config.trajectory
    manipulator = config.manipulator
    uav_setpoint = interpolate_waypoints(config.waypoints, t, trajectory.max_speed)
    if config.arm_waypoints:
        nominal = interpolate_waypoints(
            config.arm_waypoints, t, trajectory.arm_max_speed
        )
    else:
        nominal = manipulator.nominal

    blend = tracking_blend(
        config.tracking_windows, t, trajectory.tracking_blend_time
    )
    clamped = False
    ee_setpoint = nominal
    if blend > 0.0:
        if uav_pose is None:
            uav_pose = Pose(uav_setpoint, np.eye(3))
        if object_pose is None:
            object_pose = config.object.attach_pose
        tracked, clamped = object_tracking_setpoint(
            uav_pose, object_pose, True, manipulator, config.object.press_depth
        )
        ee_setpoint = (1.0 - blend) * nominal + blend * tracked

    return Setpoints(
        uav_position=uav_setpoint,
        ee_position=ee_setpoint,
        finger_position=config.gripper.grasp_aperture,
        object_tracking_enabled=blend > 0.0,
        tracking_clamped=clamped,
        tracking_blend=blend,
        yaw=trajectory.yaw,
    )
