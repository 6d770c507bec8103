from dataclasses import replace

import numpy as np
import pytest

from src.scenario import ScenarioConfig, TrajectoryConfig, load_preset
from src.trajectory import (
    TrackingWindow,
    Waypoint,
    generate_setpoints,
    interpolate_waypoints,
    tracking_blend,
    waypoint_schedule,
)

# ================================================
# Waypoints
# ================================================


def test_single_waypoint_is_held():
    waypoints = [Waypoint(0.0, (1.0, 2.0, 3.0))]
    for t in (0.0, 5.0, 100.0):
        np.testing.assert_array_equal(
            interpolate_waypoints(waypoints, t, 0.5), [1.0, 2.0, 3.0]
        )


def test_ramp_is_linear_between_waypoints():
    waypoints = [Waypoint(0.0, (0.0, 0.0, 0.0)), Waypoint(2.0, (1.0, 0.0, 0.0))]
    assert interpolate_waypoints(waypoints, 1.0, 10.0)[0] == pytest.approx(0.5)
    assert interpolate_waypoints(waypoints, 3.0, 10.0)[0] == 1.0


def test_speed_limit_stretches_fast_segments():
    waypoints = [Waypoint(0.0, (0.0, 0.0, 0.0)), Waypoint(1.0, (2.0, 0.0, 0.0))]
    _, segments = waypoint_schedule(waypoints, max_speed=0.5)
    assert segments[0].arrive == pytest.approx(4.0)
    times = np.linspace(0.0, 5.0, 501)
    path = np.array([interpolate_waypoints(waypoints, t, 0.5)[0] for t in times])
    assert np.max(np.diff(path) / np.diff(times)) <= 0.5 + 1e-9


def test_late_segment_departs_after_previous_arrival():
    waypoints = [
        Waypoint(0.0, (0.0, 0.0, 0.0)),
        Waypoint(1.0, (1.0, 0.0, 0.0)),
        Waypoint(2.0, (1.0, 1.0, 0.0)),
    ]
    _, segments = waypoint_schedule(waypoints, max_speed=0.5)
    assert segments[1].depart == pytest.approx(segments[0].arrive)


def test_step_waypoint_jumps():
    waypoints = [
        Waypoint(0.0, (0.0, 0.0, 0.0)),
        Waypoint(1.0, (0.5, 0.0, 0.0), step=True),
    ]
    assert interpolate_waypoints(waypoints, 0.999, 0.1)[0] == 0.0
    assert interpolate_waypoints(waypoints, 1.0, 0.1)[0] == 0.5


def test_schedule_needs_a_waypoint():
    with pytest.raises(ValueError):
        waypoint_schedule([], 1.0)


# ================================================
# Tracking gate
# ================================================


def test_tracking_blend_ramps_in_and_out():
    windows = [TrackingWindow(1.0, 3.0)]
    assert tracking_blend(windows, 0.5, 0.5) == 0.0
    assert tracking_blend(windows, 1.25, 0.5) == pytest.approx(0.5)
    assert tracking_blend(windows, 2.0, 0.5) == 1.0
    assert tracking_blend(windows, 3.25, 0.5) == pytest.approx(0.5)
    assert tracking_blend(windows, 4.0, 0.5) == 0.0


def test_tracking_blend_without_ramp_is_a_gate():
    windows = [TrackingWindow(1.0, 3.0)]
    assert tracking_blend(windows, 1.0, 0.0) == 1.0
    assert tracking_blend(windows, 3.0, 0.0) == 0.0


# ================================================
# Setpoints
# ================================================


def test_default_setpoints_hold_hover_and_nominal_arm():
    config = ScenarioConfig()
    sp = generate_setpoints(config, 2.0)
    np.testing.assert_array_equal(sp.uav_position, [0.0, 0.0, -1.0])
    np.testing.assert_array_equal(sp.ee_position, config.manipulator.nominal)
    assert sp.finger_position == config.gripper.grasp_aperture
    assert not sp.object_tracking_enabled


def test_tracking_window_moves_arm_towards_object():
    config = load_preset("fig3-mission")
    before = generate_setpoints(config, 5.0)
    during = generate_setpoints(config, 8.0)
    assert not before.object_tracking_enabled
    assert during.object_tracking_enabled and during.tracking_blend == 1.0
    # Reaching forward is +z of F_m
    assert during.ee_position[2] > before.ee_position[2]
    manip = config.manipulator
    assert np.all(during.ee_position >= manip.lower)
    assert np.all(during.ee_position <= manip.upper)


def test_yaw_is_passed_through():
    config = replace(ScenarioConfig(), trajectory=TrajectoryConfig(yaw=0.3))
    assert generate_setpoints(config, 0.0).yaw == 0.3


def test_arm_waypoints_override_nominal():
    config = load_preset("passivity-suite")
    assert generate_setpoints(config, 4.0).ee_position[0] == pytest.approx(0.06)
    assert generate_setpoints(config, 5.0).ee_position[0] == pytest.approx(0.08)
