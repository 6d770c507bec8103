"""
Built-in scenarios, stored as override trees on top of the scenario defaults.

Each entry has the shape of a parsed TOML scenario file, so
`scenario_from_dict(PRESETS[name])` turns it into a ScenarioConfig.
"""

# src/presets.py

from typing import Any, Dict

# Approach height of the object centre line
_CRUISE = -0.99

# Wall mission: approach, dock, grasp, pull the object off and back away
_MISSION_WAYPOINTS = [
    {"time": 0.0, "position": [1.0, 0.0, _CRUISE]},
    {"time": 1.0, "position": [1.0, 0.0, _CRUISE]},
    {"time": 4.0, "position": [1.77, 0.0, _CRUISE]},
    {"time": 11.0, "position": [1.77, 0.0, _CRUISE]},
    {"time": 14.0, "position": [1.0, 0.0, _CRUISE]},
]

_MISSION: Dict[str, Any] = {
    "simulation": {"dt": 0.001, "t_end": 25.0, "integrator": "rk4", "seed": 0},
    "initial": {"uav_position": [1.0, 0.0, _CRUISE]},
    "object": {"position": [1.95, 0.0, -1.0], "press_depth": 0.002},
    "contact": {"breakaway_force": 1.0},
    "waypoints": _MISSION_WAYPOINTS,
    "tracking_windows": [{"t_on": 6.0, "t_off": 10.0}],
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "hover": {
        "name": "hover",
        "simulation": {"dt": 0.001, "t_end": 5.0},
        "initial": {"uav_position": [0.0, 0.0, -1.0]},
        "waypoints": [{"time": 0.0, "position": [0.0, 0.0, -1.0]}],
        "object": {"position": [10.0, 0.0, -1.0]},
        "output": {"plots": ["uav"]},
    },
    "fig3-mission": {
        "name": "fig3-mission",
        **_MISSION,
        "output": {"plots": ["uav", "gripper", "energy"]},
    },
    # Same simulation as the wall mission, plotted for the arm and the fingers
    "fig4-manipulator": {
        "name": "fig4-manipulator",
        **_MISSION,
        "output": {"plots": ["manipulator", "gripper"]},
    },
    "passivity-suite": {
        "name": "passivity-suite",
        "simulation": {"dt": 0.001, "t_end": 15.0},
        "initial": {"uav_position": [0.0, 0.0, -1.0]},
        "object": {"position": [10.0, 0.0, -1.0]},
        "waypoints": [
            {"time": 0.0, "position": [0.0, 0.0, -1.0]},
            {"time": 1.0, "position": [0.0, 0.0, -1.0]},
            # Ramped over 2 s, a hard step leaves R* more than 2 deg behind
            {"time": 3.0, "position": [0.5, 0.0, -1.0]},
        ],
        "arm_waypoints": [
            {"time": 0.0, "position": [0.06, 0.0, 0.005]},
            {"time": 5.0, "position": [0.08, 0.0, 0.005], "step": True},
        ],
        "output": {"plots": ["uav", "manipulator", "energy"]},
    },
    "flight-test": {
        "name": "flight-test",
        "simulation": {"dt": 0.001, "t_end": 45.0},
        "initial": {"uav_position": [1.0, 0.0, _CRUISE]},
        "object": {"position": [1.95, 0.0, -1.0], "press_depth": 0.002},
        "contact": {"breakaway_force": 1.0},
        "trajectory": {"max_speed": 0.1},
        "waypoints": [
            {"time": 0.0, "position": [1.0, 0.0, _CRUISE]},
            {"time": 5.0, "position": [1.0, 0.0, _CRUISE]},
            {"time": 15.0, "position": [1.77, 0.0, _CRUISE]},
            {"time": 31.0, "position": [1.77, 0.0, _CRUISE]},
            {"time": 40.0, "position": [1.0, 0.0, _CRUISE]},
        ],
        "tracking_windows": [{"t_on": 20.0, "t_off": 30.0}],
        "output": {"plots": ["uav", "manipulator", "gripper"]},
    },
}
