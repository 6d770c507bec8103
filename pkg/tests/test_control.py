from dataclasses import replace

import numpy as np
import pytest

from src.contact import build_grasp_matrix, resolve_contacts
from src.control import (
    AttitudeGains,
    FeedForward,
    ImpedanceGains,
    Setpoints,
    attitude_authority,
    attitude_error,
    attitude_error_deg,
    feed_forward,
    finger_scale,
    gripper_control,
    gripper_impedance,
    manipulator_control,
    object_tracking_setpoint,
    synergy_vector,
    thrust_attitude_from_u,
    uav_control,
)
from src.errors import DegenerateThrustError
from src.model import (
    E3,
    FORWARD_FACING,
    GRAVITY,
    MissionPhase,
    end_effector_kinematics,
)
from src.spatial_math import Pose, rotation_about


def _setpoints(uav=(0.0, 0.0, -1.0), ee=(0.06, 0.0, 0.005), finger=-0.02):
    return Setpoints(np.array(uav), np.array(ee), finger)


# ================================================
# UAV position and attitude
# ================================================


def test_uav_control_at_setpoint_is_pure_feed_forward(plant, hover_state):
    ff = FeedForward(np.array([0.0, 0.0, 3.4]), np.zeros(3))
    u = uav_control(hover_state, _setpoints(), plant.gains.uav, ff)
    np.testing.assert_array_equal(u, -ff.uav)


def test_uav_control_pulls_towards_setpoint(plant, hover_state):
    ff = FeedForward(np.zeros(3), np.zeros(3))
    setpoints = _setpoints(uav=(1.0, 0.0, -1.0))
    u = uav_control(hover_state, setpoints, plant.gains.uav, ff)
    assert u[0] == pytest.approx(plant.gains.uav.stiffness[0])


def test_hover_thrust_is_level():
    thrust, R_des = thrust_attitude_from_u(np.array([0.0, 0.0, -3.0]), 1.3)
    assert thrust == pytest.approx(1.3 * GRAVITY + 3.0)
    np.testing.assert_allclose(R_des, np.eye(3), atol=1e-15)


def test_thrust_direction_tilts_towards_commanded_force():
    u = np.array([2.0, 0.0, 0.0])
    thrust, R_des = thrust_attitude_from_u(u, 1.0)
    realised = thrust * (R_des @ np.array([0.0, 0.0, -1.0])) + GRAVITY * E3
    np.testing.assert_allclose(realised, u, atol=1e-12)


def test_yaw_sets_the_heading():
    _, R_des = thrust_attitude_from_u(np.zeros(3), 1.0, yaw=np.pi / 2)
    np.testing.assert_allclose(R_des, rotation_about(E3, np.pi / 2), atol=1e-12)


def test_free_fall_command_is_degenerate():
    with pytest.raises(DegenerateThrustError):
        thrust_attitude_from_u(1.0 * GRAVITY * E3, 1.0)


def test_attitude_error_of_small_rotation():
    R = rotation_about(E3, 0.01)
    np.testing.assert_allclose(
        attitude_error(R, np.eye(3)), [0.0, 0.0, np.sin(0.01)], atol=1e-14
    )
    assert attitude_error_deg(R, np.eye(3)) == pytest.approx(np.degrees(0.01))
    np.testing.assert_array_equal(attitude_error(R, R), np.zeros(3))


def test_attitude_authority_cancels_reaction_at_rest(plant, hover_state):
    reaction = np.array([0.1, -0.2, 0.05])
    gyro = np.array([0.0, 0.01, 0.0])
    moment = attitude_authority(
        hover_state, np.eye(3), AttitudeGains(), reaction, plant.uav, gyro
    )
    np.testing.assert_allclose(moment, -reaction - gyro, atol=1e-15)


# ================================================
# Manipulator
# ================================================


def test_manipulator_command_subtracts_arm_weight(plant, hover_state):
    ff = feed_forward(
        MissionPhase.FREE_FLIGHT,
        hover_state,
        plant.manipulator,
        plant.gripper,
        plant.obj,
    )
    u, f_man = manipulator_control(
        hover_state, _setpoints(), plant.gains.manipulator, ff, plant.manipulator
    )
    np.testing.assert_allclose(u, [plant.gripper.phalange_mass * GRAVITY, 0, 0])
    carried = (plant.manipulator.mass + plant.gripper.phalange_mass) * GRAVITY
    np.testing.assert_allclose(f_man, [carried, 0.0, 0.0])


def test_feed_forward_adds_object_after_grasp(plant, hover_state):
    free = feed_forward(
        MissionPhase.FREE_FLIGHT,
        hover_state,
        plant.manipulator,
        plant.gripper,
        plant.obj,
    )
    held = feed_forward(
        MissionPhase.AERIAL_GRASP,
        hover_state,
        plant.manipulator,
        plant.gripper,
        plant.obj,
    )
    np.testing.assert_allclose(held.uav - free.uav, plant.obj.mass * GRAVITY * E3)


def test_tracking_setpoint_reaches_object(plant):
    manip = plant.manipulator
    desired = np.array([0.06, 0.01, 0.03])
    uav_pose = Pose(np.array([1.0, 0.0, -1.0]))
    body = np.asarray(manip.mount_position) + FORWARD_FACING @ desired
    depth = 0.002
    target = uav_pose.position + body
    obj = Pose(target - depth * FORWARD_FACING[:, 2], FORWARD_FACING)
    setpoint, clamped = object_tracking_setpoint(uav_pose, obj, True, manip, depth)
    np.testing.assert_allclose(setpoint, desired, atol=1e-12)
    assert not clamped


def test_tracking_setpoint_is_clamped_to_workspace(plant):
    manip = plant.manipulator
    far = Pose(np.array([5.0, 0.0, -1.0]), FORWARD_FACING)
    setpoint, clamped = object_tracking_setpoint(
        Pose(np.array([0.0, 0.0, -1.0])), far, True, manip
    )
    assert clamped
    assert np.all(setpoint >= manip.lower) and np.all(setpoint <= manip.upper)


def test_tracking_disabled_returns_nominal(plant):
    setpoint, clamped = object_tracking_setpoint(
        Pose(), Pose(), False, plant.manipulator
    )
    np.testing.assert_array_equal(setpoint, plant.manipulator.nominal)
    assert not clamped


# ================================================
# Gripper
# ================================================


def test_synergy_closes_every_phalange():
    sigma = synergy_vector(6)
    assert sigma.shape == (21,)
    assert np.count_nonzero(sigma) == 6
    np.testing.assert_array_equal(sigma[2:18:3], -np.ones(6))
    np.testing.assert_array_equal(sigma[18:], np.zeros(3))


def test_finger_scale_of_symmetric_grasp(plant, hover_state):
    palm = end_effector_kinematics(hover_state, plant.manipulator).pose
    state = replace(
        hover_state,
        aperture=0.02,
        object_pose=palm.compose(Pose(np.array([0.0, 0.0, -0.001]))),
    )
    contacts = resolve_contacts(
        state, plant.manipulator, plant.gripper, plant.obj, plant.contact
    )
    c = finger_scale(build_grasp_matrix(contacts.frames))
    # The symmetric squeeze is mostly internal force
    assert 0.0 < c <= 1.0 + 1e-12


def test_gripper_impedance_per_phase(plant):
    sp = _setpoints()
    grip = plant.gripper
    assert gripper_impedance(MissionPhase.FREE_FLIGHT, sp, None, grip).target == (
        grip.open_aperture
    )
    held = gripper_impedance(MissionPhase.AERIAL_GRASP, sp, None, grip)
    assert held.target == grip.closed_hold_aperture and held.scale == 1.0


def test_gripper_control_opens_towards_target(plant, hover_state):
    gains = ImpedanceGains((100.0,), (5.0,))
    closed = replace(hover_state, aperture=0.03)
    u_h = gripper_control(closed, _setpoints(), gains, None, plant.gripper)
    target = plant.gripper.open_aperture
    assert u_h == pytest.approx(-100.0 * (0.03 - target))
    assert u_h > 0.0


@pytest.mark.parametrize("phase", [MissionPhase.FREE_FLIGHT, MissionPhase.AERIAL_GRASP])
def test_gripper_at_rest_on_target_needs_no_force(plant, hover_state, phase):
    target = gripper_impedance(phase, _setpoints(), None, plant.gripper).target
    at_rest = replace(hover_state, mission=phase, aperture=target, aperture_rate=0.0)
    u_h = gripper_control(
        at_rest, _setpoints(), plant.gains.gripper, None, plant.gripper
    )
    assert u_h == 0.0
