"""
Forward dynamics of the quadrotor, the lumped delta manipulator and the gripper.

Interconnection wrenches use the load convention: f_man^m is what the UAV
applies to the manipulator at its base, f_h^e what the manipulator applies to
the gripper and f_obj^o what the gripper applies to the object. The UAV is
driven by the reaction −(f_man^m, M_man^m).
"""

from typing import Optional, Tuple

import numpy as np

from src.errors import AllocationError, MissionStateError
from src.model import (
    E3,
    GRAVITY,
    GripperParams,
    GyroModel,
    ManipulatorParams,
    MissionPhase,
    ObjectParams,
    SystemState,
    UavParams,
    gravity_in,
)
from src.spatial_math import (
    Frame,
    Matrix,
    Pose,
    Vector,
    Wrench,
    cross,
    wrench_transform,
)

# Spin direction of each rotor, matching the sign of its yaw reaction row.
ROTOR_SPIN = np.array([1.0, -1.0, 1.0, -1.0])


# ================================================
# Propeller mixing
# ================================================


def mixer_matrix(params: UavParams) -> Matrix:
    """Map from the four rotor thrusts to [f_p, M_x, M_y, M_z] in F_b."""
    d = params.arm_length
    c = params.torque_ratio
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [0.0, -d, 0.0, d],
            [d, 0.0, -d, 0.0],
            [-c, c, -c, c],
        ]
    )


def mixer_forward(thrusts: Vector, params: UavParams) -> Tuple[float, Vector]:
    """
    Total thrust and body moment produced by the rotor thrusts.

    :param thrusts: f1..f4 in N (negative values are allowed).
    :return: (f_p^b, M_p^b).
    """
    out = mixer_matrix(params) @ np.asarray(thrusts, dtype=float)
    return float(out[0]), out[1:]


def mixer_inverse(thrust: float, moment: Vector, params: UavParams) -> Vector:
    """
    Rotor thrusts realising a total thrust and body moment.

    :raises AllocationError: if the arm length or the torque ratio is zero.
    """
    if params.arm_length == 0.0 or params.torque_ratio == 0.0:
        raise AllocationError(
            f"mixer is singular (arm_length={params.arm_length}, "
            f"torque_ratio={params.torque_ratio})"
        )
    target = np.concatenate([[thrust], np.asarray(moment, dtype=float)])
    return np.linalg.solve(mixer_matrix(params), target)


def gyroscopic_moment(thrusts: Vector, omega: Vector, params: UavParams) -> Vector:
    """
    M_gy of the spinning rotors.

    The zero model returns zeros. The rotor-momentum model uses signed rotor
    speeds Ω_i = ±sqrt(f_i / k_f) and M_gy = Σ J_r·Ω_i·(ω × ẑ^b).
    """
    if params.gyro_model == GyroModel.ZERO.value:
        return np.zeros(3)
    speeds = ROTOR_SPIN * np.sqrt(
        np.maximum(np.asarray(thrusts, dtype=float), 0.0) / params.thrust_coefficient
    )
    return params.rotor_inertia * float(np.sum(speeds)) * cross(omega, E3)


# ================================================
# UAV
# ================================================


def reaction_moment(
    state: SystemState, w_man: Wrench, manipulator: ManipulatorParams
) -> Vector:
    """
    Moment the manipulator imposes on the UAV: R_b·R_m·M + R_b·(R_m·f × p_m^b).

    :param w_man: Reaction wrench acting on the UAV, expressed in F_m.
    """
    at_base = wrench_transform(w_man, manipulator.mount_pose, Frame.BODY)
    return state.uav_rotation @ at_base.moment


def uav_accel(
    state: SystemState,
    thrust: float,
    moment: Vector,
    w_man: Wrench,
    uav: UavParams,
    manipulator: ManipulatorParams,
    gyro: Optional[Vector] = None,
    g: float = GRAVITY,
) -> Tuple[Vector, Vector]:
    """
    Translational and rotational accelerations of the UAV.

    Parameters:
    state: Current system state.
    thrust: Total propeller thrust f_p^b (N).
    moment: Propeller moment M_p^b (N·m).
    w_man: Wrench the manipulator applies to the UAV, expressed in F_m.
    gyro: Gyroscopic moment M_gy (zero when omitted).

    Returns:
    (v̇^i, ω̇_b^{b,i}).
    """
    R_b = state.uav_rotation
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    omega = state.uav_rates
    J = uav.inertia_matrix
    gyro = np.zeros(3) if gyro is None else gyro

    force = (
        uav.mass * g * E3
        + thrust * (R_b @ np.array([0.0, 0.0, -1.0]))
        + R_b @ (R_m @ w_man.force)
    )
    torque = (
        -cross(omega, J @ omega)
        + gyro
        + np.asarray(moment, dtype=float)
        + reaction_moment(state, w_man, manipulator)
    )
    return force / uav.mass, np.linalg.solve(J, torque)


# ================================================
# Manipulator, gripper and object
# ================================================


def manipulator_reaction(
    state: SystemState,
    w_h: Wrench,
    accel_e: Vector,
    manipulator: ManipulatorParams,
    g: float = GRAVITY,
) -> Wrench:
    """
    Wrench (f_man^m, M_man^m) the base applies to the manipulator.

    f_man^m = −η_man + m_man·R_e^m·v̇^e + R_e^m·f_h^e with η_man the weight of
    the arm in F_m; the moment transports the end-effector load to F_m.

    :param w_h: Gripper wrench (f_h^e, M_h^e) in F_e.
    :param accel_e: Inertial end-effector acceleration expressed in F_e.
    """
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    g_m = gravity_in(state.uav_rotation @ R_m, g)
    eta = manipulator.mass * g_m
    # R_e^m = I: the delta platform only translates.
    force = -eta + manipulator.mass * accel_e + w_h.force
    at_end_effector = Wrench(force, w_h.moment, Frame.END_EFFECTOR)
    return wrench_transform(
        at_end_effector, Pose(state.ee_position, np.eye(3)), Frame.MANIPULATOR
    )


def gripper_reaction(
    state: SystemState,
    f_phal: Vector,
    w_obj: Wrench,
    object_in_ee: Pose,
    manipulator: ManipulatorParams,
    gripper: GripperParams,
    g: float = GRAVITY,
) -> Wrench:
    """
    Wrench (f_h^e, M_h^e) the manipulator applies to the gripper.

    The phalange masses are lumped at the palm, so only the object load adds
    a moment.
    """
    R_e = state.uav_rotation @ np.asarray(manipulator.mount_rotation, dtype=float)
    eta = gripper.phalange_mass * gravity_in(R_e, g)
    load = wrench_transform(w_obj, object_in_ee, Frame.END_EFFECTOR)
    force = -eta + np.asarray(f_phal) + load.force
    return Wrench(force, load.moment, Frame.END_EFFECTOR)


def object_inertial_wrench(
    state: SystemState, accel: Vector, obj: ObjectParams, g: float = GRAVITY
) -> Wrench:
    """
    Wrench the gripper applies to the grasped object, in F_o.

    :param accel: Inertial acceleration of the object (m/s²).
    :raises MissionStateError: outside AerialGrasp.
    """
    if state.mission is not MissionPhase.AERIAL_GRASP:
        raise MissionStateError(
            f"object inertial wrench is undefined in {state.mission.value}"
        )
    R_o = state.object_pose.rotation
    force = obj.mass * (R_o.T @ (np.asarray(accel) - g * E3))
    return Wrench(force, cross(obj.centre_of_gravity, force), Frame.OBJECT)


def limit_force(
    x: Vector,
    x_dot: Vector,
    lower: Vector,
    upper: Vector,
    stiffness: float,
    damping: float,
) -> Vector:
    """
    One-sided spring-damper pushing a coordinate back inside [lower, upper].

    Works on scalars and arrays; the stop never pulls outward.
    """
    x = np.asarray(x, dtype=float)
    x_dot = np.asarray(x_dot, dtype=float)
    below = np.maximum(stiffness * (lower - x) - damping * x_dot, 0.0)
    above = np.minimum(stiffness * (upper - x) - damping * x_dot, 0.0)
    return np.where(x < lower, below, 0.0) + np.where(x > upper, above, 0.0)


def relative_ee_accel(
    state: SystemState,
    ee_accel: Vector,
    uav_linear: Vector,
    uav_angular: Vector,
    offset_body: Vector,
    offset_rate_body: Vector,
    manipulator: ManipulatorParams,
) -> Vector:
    """
    p̈_e^m from the inertial accelerations of the end-effector and of the UAV.

    Removes the transport, Euler, centripetal and Coriolis terms of the
    rotating body frame.
    """
    R_b = state.uav_rotation
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    omega = state.uav_rates
    in_body = (
        R_b.T @ (ee_accel - uav_linear)
        - cross(uav_angular, offset_body)
        - cross(omega, cross(omega, offset_body))
        - 2.0 * cross(omega, offset_rate_body)
    )
    return R_m.T @ in_body
