"""
Impedance controllers of the UAV, the manipulator and the gripper.

Every outer loop is a PD law with gravity feed-forward,
u = −K(p − p*) − D·ṗ − u_FF, so that each closed loop reads
m·p̈ + D·ṗ + K(p − p*) = d. The attitude loop is a high-gain SO(3) PD that
also cancels the moments the manipulator chain imposes on the airframe.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.errors import DegenerateThrustError
from src.model import (
    E3,
    GRAVITY,
    GripperParams,
    ManipulatorParams,
    MissionPhase,
    ObjectParams,
    SystemState,
    UavParams,
    gravity_in,
)
from src.spatial_math import Matrix, Pose, Vector, cross, pinv, rotation_angle, vee

THRUST_EPSILON = 1e-9


@dataclass(frozen=True)
class ImpedanceGains:
    """Diagonal stiffness K (N/m) and damping D (N·s/m)."""

    stiffness: Tuple[float, ...]
    damping: Tuple[float, ...]

    @property
    def K(self) -> Matrix:
        return np.diag(np.asarray(self.stiffness, dtype=float))

    @property
    def D(self) -> Matrix:
        return np.diag(np.asarray(self.damping, dtype=float))

    def problems(self, prefix: str, size: int = 3) -> List[str]:
        found: List[str] = []
        for name, values in (("stiffness", self.stiffness), ("damping", self.damping)):
            if len(values) != size:
                found.append(f"{prefix}.{name} needs {size} entries")
            elif any(not (v > 0.0) or not np.isfinite(v) for v in values):
                found.append(f"{prefix}.{name} entries must be > 0")
        return found


@dataclass(frozen=True)
class AttitudeGains:
    """SO(3) PD gains per unit inertia."""

    k_r: float = 400.0
    k_omega: float = 40.0

    def problems(self, prefix: str = "gains.attitude") -> List[str]:
        found: List[str] = []
        if not self.k_r > 0.0:
            found.append(f"{prefix}.k_r must be > 0")
        if not self.k_omega > 0.0:
            found.append(f"{prefix}.k_omega must be > 0")
        return found


def _uav_gains() -> ImpedanceGains:
    return ImpedanceGains((8.0, 8.0, 8.0), (5.0, 5.0, 5.0))


def _manipulator_gains() -> ImpedanceGains:
    return ImpedanceGains((50.0, 50.0, 50.0), (8.0, 8.0, 8.0))


def _gripper_gains() -> ImpedanceGains:
    return ImpedanceGains((100.0,), (5.0,))


@dataclass(frozen=True)
class ControllerGains:
    uav: ImpedanceGains = field(default_factory=_uav_gains)
    manipulator: ImpedanceGains = field(default_factory=_manipulator_gains)
    gripper: ImpedanceGains = field(default_factory=_gripper_gains)
    attitude: AttitudeGains = field(default_factory=AttitudeGains)

    def problems(self) -> List[str]:
        return (
            self.uav.problems("gains.uav")
            + self.manipulator.problems("gains.manipulator")
            + self.gripper.problems("gains.gripper", size=1)
            + self.attitude.problems()
        )


@dataclass(frozen=True)
class FeedForward:
    """
    Gravity compensation: UAV term in F_i, manipulator term in F_m.

    The aperture coordinate carries no weight, so the gripper has no term.
    """

    uav: Vector
    manipulator: Vector


@dataclass(frozen=True)
class Setpoints:
    """Desired UAV position (F_i), end-effector point (F_m) and finger position."""

    uav_position: Vector
    ee_position: Vector
    finger_position: float
    object_tracking_enabled: bool = False
    tracking_clamped: bool = False
    tracking_blend: float = 0.0
    yaw: float = 0.0


@dataclass(frozen=True)
class GripperImpedance:
    """
    Finger impedance seen from the aperture coordinate.

    scale is the synergy factor c with p_f = c·s, target the aperture s*.
    """

    scale: float
    target: float


# ================================================
# Feed-forward
# ================================================


def feed_forward(
    mission: MissionPhase,
    state: SystemState,
    manipulator: ManipulatorParams,
    gripper: GripperParams,
    obj: ObjectParams,
    g: float = GRAVITY,
) -> FeedForward:
    """
    Gravity feed-forward per mission phase.

    FreeFlight and Dock: the UAV carries the arm and the gripper, the arm
    carries the gripper. AerialGrasp adds the object weight to both.
    """
    carried = gripper.phalange_mass
    if mission is MissionPhase.AERIAL_GRASP:
        carried += obj.mass
    R_e = state.uav_rotation @ np.asarray(manipulator.mount_rotation, dtype=float)
    return FeedForward(
        uav=(manipulator.mass + carried) * g * E3,
        manipulator=carried * gravity_in(R_e, g),
    )


# ================================================
# UAV position and attitude
# ================================================


def uav_control(
    state: SystemState, setpoints: Setpoints, gains: ImpedanceGains, ff: FeedForward
) -> Vector:
    """u_uav = −K(p_b − p_b*) − D·ṗ_b − u_FF."""
    error = state.uav_position - setpoints.uav_position
    return -gains.K @ error - gains.D @ state.uav_velocity - ff.uav


def thrust_attitude_from_u(
    u: Vector, uav_mass: float, g: float = GRAVITY, yaw: float = 0.0
) -> Tuple[float, Matrix]:
    """
    Collective thrust and desired attitude realising u_uav.

    The thrust vector f_p·R·[0,0,−1]ᵀ must equal u − m·g·ẑ, so the body z
    axis points opposite to that vector; the heading is held at `yaw`.

    :raises DegenerateThrustError: when u cancels gravity (free-fall command).
    """
    force = np.asarray(u, dtype=float) - uav_mass * g * E3
    magnitude = float(np.linalg.norm(force))
    if magnitude < THRUST_EPSILON:
        raise DegenerateThrustError(f"commanded thrust vanishes (u = {u})")
    z_axis = -force / magnitude
    heading = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    y_axis = cross(z_axis, heading)
    norm = float(np.linalg.norm(y_axis))
    if norm < THRUST_EPSILON:
        raise DegenerateThrustError("thrust direction is aligned with the heading")
    y_axis = y_axis / norm
    x_axis = cross(y_axis, z_axis)
    return magnitude, np.column_stack([x_axis, y_axis, z_axis])


def attitude_error(R: Matrix, R_des: Matrix) -> Vector:
    """e_R = ½·vee(R*ᵀR − RᵀR*)."""
    return 0.5 * vee(R_des.T @ R - R.T @ R_des)


def attitude_error_deg(R: Matrix, R_des: Matrix) -> float:
    return float(np.degrees(rotation_angle(R_des.T @ R)))


def attitude_authority(
    state: SystemState,
    R_des: Matrix,
    gains: AttitudeGains,
    reaction: Vector,
    uav: UavParams,
    gyro: Optional[Vector] = None,
) -> Vector:
    """
    Propeller moment M_p^b of the high-authority attitude loop.

    :param reaction: Moment the manipulator chain imposes on the UAV, as it
        enters the rotational dynamics; it is cancelled here.
    """
    J = uav.inertia_matrix
    omega = state.uav_rates
    e_R = attitude_error(state.uav_rotation, R_des)
    pd = -gains.k_r * e_R - gains.k_omega * omega
    gyro = np.zeros(3) if gyro is None else gyro
    return J @ pd + cross(omega, J @ omega) - gyro - reaction


# ================================================
# Manipulator
# ================================================


def manipulator_control(
    state: SystemState,
    setpoints: Setpoints,
    gains: ImpedanceGains,
    ff: FeedForward,
    manipulator: ManipulatorParams,
    g: float = GRAVITY,
) -> Tuple[Vector, Vector]:
    """
    Impedance law of the end-effector in F_m.

    :return: (u_man, f_man^m) with f_man^m = u_man − η_man.
    """
    error = state.ee_position - setpoints.ee_position
    u = -gains.K @ error - gains.D @ state.ee_velocity - ff.manipulator
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    eta = manipulator.mass * gravity_in(state.uav_rotation @ R_m, g)
    return u, u - eta


def object_tracking_setpoint(
    uav_pose: Pose,
    object_pose: Pose,
    enabled: bool,
    manipulator: ManipulatorParams,
    press_depth: float = 0.0,
) -> Tuple[Vector, bool]:
    """
    End-effector setpoint that puts the palm on the object.

    The wall point is the front-face centre pushed `press_depth` into the
    object; it is mapped into F_m through the measured UAV pose and clamped
    to the workspace.

    :return: (p_e*^m, clamped).
    """
    if not enabled:
        return manipulator.nominal, False
    target = object_pose.position + press_depth * object_pose.rotation[:, 2]
    in_body = uav_pose.rotation.T @ (target - uav_pose.position)
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    desired = R_m.T @ (in_body - np.asarray(manipulator.mount_position, dtype=float))
    reachable = manipulator.clamp(desired)
    return reachable, bool(np.any(reachable != desired))


# ================================================
# Gripper
# ================================================


def synergy_vector(n_phalanges: int = 6) -> Vector:
    """Actuator synergy over f_c: each phalange closes along its inward normal."""
    sigma = np.zeros(3 * (n_phalanges + 1))
    sigma[2 : 3 * n_phalanges : 3] = -1.0
    return sigma


def finger_scale(G: Matrix, n_phalanges: int = 6) -> float:
    """
    Synergy factor c of the finger coordinate p_f = c·s.

    The synergy is projected on the null space of the grasp matrix,
    N = I − G⁺G, and c = σᵀNσ / σᵀσ.
    """
    sigma = synergy_vector(n_phalanges)
    projector = np.eye(G.shape[1]) - pinv(G) @ G
    return float(sigma @ projector @ sigma / (sigma @ sigma))


def gripper_impedance(
    mission: MissionPhase,
    setpoints: Setpoints,
    G: Optional[Matrix],
    gripper: GripperParams,
) -> GripperImpedance:
    """Synergy factor and aperture target for the current phase."""
    if mission is MissionPhase.DOCK:
        return GripperImpedance(
            finger_scale(G, gripper.n_phalanges), setpoints.finger_position
        )
    if mission is MissionPhase.AERIAL_GRASP:
        return GripperImpedance(1.0, gripper.closed_hold_aperture)
    return GripperImpedance(1.0, gripper.open_aperture)


def gripper_control(
    state: SystemState,
    setpoints: Setpoints,
    gains: ImpedanceGains,
    G: Optional[Matrix],
    gripper: GripperParams,
) -> float:
    """
    Scalar actuator force u_h of the gripper.

    In Dock the finger coordinate comes from the synergy through the grasp
    matrix; outside Dock the gripper idles, open in FreeFlight and closed on
    the object in AerialGrasp.
    """
    impedance = gripper_impedance(state.mission, setpoints, G, gripper)
    c = impedance.scale
    position_error = c * (state.aperture - impedance.target)
    k_h = gains.stiffness[0]
    d_h = gains.damping[0]
    return -k_h * position_error - d_h * c * state.aperture_rate
