"""
Physical parameters, the simulation state and the frame chain of the flying hand.

Frame conventions: the inertial frame F_i has z pointing down, so gravity is
+g·ẑ^i and the propellers push along −ẑ^b. The manipulator base F_m is fixed
in the UAV body: its x axis is the height of the end-effector (up), y is
sideways and z is the forward (approach) direction. The delta platform only
translates, hence R_e^m = I and the palm frame F_e is F_m shifted to p_e^m.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.spatial_math import Matrix, Pose, Vector, cross, is_rotation

GRAVITY = 9.81
E3 = np.array([0.0, 0.0, 1.0])

# Rotation of a frame whose x axis points up, y sideways and z forward,
# written in a frame with x forward, y sideways and z down.
FORWARD_FACING = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
    ]
)


def gravity_vector(g: float = GRAVITY) -> Vector:
    """Gravitational acceleration in F_i."""
    return g * E3


def gravity_in(rotation_in_inertial: Matrix, g: float = GRAVITY) -> Vector:
    """Gravitational acceleration expressed in a frame with the given attitude."""
    return rotation_in_inertial.T @ gravity_vector(g)


class GyroModel(Enum):
    ZERO = "zero"
    ROTOR_MOMENTUM = "rotor-momentum"


class MissionPhase(Enum):
    """The three operating states of the flying hand."""

    FREE_FLIGHT = "FreeFlight"
    DOCK = "Dock"
    AERIAL_GRASP = "AerialGrasp"


PHASE_ORDER = (MissionPhase.FREE_FLIGHT, MissionPhase.DOCK, MissionPhase.AERIAL_GRASP)


def _check_positive(problems: List[str], name: str, value: float) -> None:
    if not np.isfinite(value) or value <= 0.0:
        problems.append(f"{name} must be > 0 (got {value})")


def _check_finite(problems: List[str], name: str, values) -> None:
    if not np.all(np.isfinite(np.asarray(values, dtype=float))):
        problems.append(f"{name} must be finite")


@dataclass(frozen=True)
class UavParams:
    """Quadrotor mass properties and propeller geometry."""

    mass: float = 1.3
    inertia: Tuple[float, float, float] = (0.02, 0.02, 0.04)
    arm_length: float = 0.2
    torque_ratio: float = 0.01
    gyro_model: str = GyroModel.ZERO.value
    rotor_inertia: float = 3e-5
    thrust_coefficient: float = 1e-5
    clamp_thrust: bool = False
    max_rotor_thrust: float = 10.0

    @property
    def inertia_matrix(self) -> Matrix:
        return np.diag(np.asarray(self.inertia, dtype=float))

    def problems(self, prefix: str = "uav") -> List[str]:
        found: List[str] = []
        _check_positive(found, f"{prefix}.mass", self.mass)
        if len(self.inertia) != 3 or any(not (i > 0.0) for i in self.inertia):
            found.append(f"{prefix}.inertia must hold three positive principal moments")
        _check_positive(found, f"{prefix}.arm_length", self.arm_length)
        _check_positive(found, f"{prefix}.torque_ratio", self.torque_ratio)
        if self.gyro_model not in {m.value for m in GyroModel}:
            found.append(
                f"{prefix}.gyro_model must be 'zero' or 'rotor-momentum' "
                f"(got {self.gyro_model!r})"
            )
        _check_positive(found, f"{prefix}.rotor_inertia", self.rotor_inertia)
        _check_positive(found, f"{prefix}.thrust_coefficient", self.thrust_coefficient)
        _check_positive(found, f"{prefix}.max_rotor_thrust", self.max_rotor_thrust)
        return found


@dataclass(frozen=True)
class ManipulatorParams:
    """Delta manipulator lumped at its end-effector."""

    mass: float = 0.3
    mount_position: Tuple[float, float, float] = (0.15, 0.0, 0.05)
    mount_rotation: Tuple[Tuple[float, ...], ...] = tuple(map(tuple, FORWARD_FACING))
    workspace_min: Tuple[float, float, float] = (0.0, -0.05, 0.0)
    workspace_max: Tuple[float, float, float] = (0.12, 0.05, 0.05)
    nominal_position: Tuple[float, float, float] = (0.06, 0.0, 0.005)
    limit_stiffness: float = 2.0e4
    limit_damping: float = 50.0

    @property
    def mount_pose(self) -> Pose:
        """Pose of F_m in F_b."""
        return Pose(np.asarray(self.mount_position), np.asarray(self.mount_rotation))

    @property
    def lower(self) -> Vector:
        return np.asarray(self.workspace_min, dtype=float)

    @property
    def upper(self) -> Vector:
        return np.asarray(self.workspace_max, dtype=float)

    @property
    def nominal(self) -> Vector:
        return np.asarray(self.nominal_position, dtype=float)

    def clamp(self, position: Vector) -> Vector:
        return np.clip(position, self.lower, self.upper)

    def problems(self, prefix: str = "manipulator") -> List[str]:
        found: List[str] = []
        _check_positive(found, f"{prefix}.mass", self.mass)
        _check_finite(found, f"{prefix}.mount_position", self.mount_position)
        if not is_rotation(np.asarray(self.mount_rotation, dtype=float)):
            found.append(f"{prefix}.mount_rotation must be a rotation matrix")
        if np.any(self.lower >= self.upper):
            found.append(f"{prefix}.workspace_min must be below workspace_max")
        elif np.any(self.nominal < self.lower) or np.any(self.nominal > self.upper):
            found.append(f"{prefix}.nominal_position must lie inside the workspace")
        _check_positive(found, f"{prefix}.limit_stiffness", self.limit_stiffness)
        _check_positive(found, f"{prefix}.limit_damping", self.limit_damping)
        return found


@dataclass(frozen=True)
class GripperParams:
    """
    Underactuated three-finger gripper driven by one motor.

    The aperture s is the radial distance of every phalange contact point
    from the palm axis; the single actuator moves all six points together.
    """

    phalange_mass: float = 0.05
    n_fingers: int = 3
    n_phalanges_per_finger: int = 2
    aperture_min: float = 0.0
    aperture_max: float = 0.07
    open_aperture: float = 0.065
    closed_hold_aperture: float = 0.022
    grasp_aperture: float = -0.02
    finger_angles_deg: Tuple[float, ...] = (0.0, 120.0, 240.0)
    phalange_offsets: Tuple[float, ...] = (0.015, 0.035)
    limit_stiffness: float = 5.0e3
    limit_damping: float = 10.0

    @property
    def n_phalanges(self) -> int:
        return self.n_fingers * self.n_phalanges_per_finger

    def problems(self, prefix: str = "gripper") -> List[str]:
        found: List[str] = []
        _check_positive(found, f"{prefix}.phalange_mass", self.phalange_mass)
        if self.n_fingers != 3 or self.n_phalanges_per_finger != 2:
            found.append(f"{prefix} must have 3 fingers with 2 phalanges each")
        if not self.aperture_min < self.aperture_max:
            found.append(f"{prefix}.aperture_min must be below aperture_max")
        elif not self.aperture_min <= self.open_aperture <= self.aperture_max:
            found.append(f"{prefix}.open_aperture must lie in the aperture range")
        if len(self.finger_angles_deg) != self.n_fingers:
            found.append(f"{prefix}.finger_angles_deg needs {self.n_fingers} entries")
        if len(self.phalange_offsets) != self.n_phalanges_per_finger:
            found.append(
                f"{prefix}.phalange_offsets needs {self.n_phalanges_per_finger} entries"
            )
        _check_finite(found, f"{prefix}.grasp_aperture", self.grasp_aperture)
        _check_positive(found, f"{prefix}.limit_stiffness", self.limit_stiffness)
        _check_positive(found, f"{prefix}.limit_damping", self.limit_damping)
        return found


@dataclass(frozen=True)
class ObjectParams:
    """Cylindrical object mounted on the wall, axis along the wall normal."""

    mass: float = 0.1
    radius: float = 0.025
    length: float = 0.05
    position: Tuple[float, float, float] = (1.95, 0.0, -1.0)
    rotation: Tuple[Tuple[float, ...], ...] = tuple(map(tuple, FORWARD_FACING))
    press_depth: float = 0.002
    pose_noise_std: float = 0.0

    @property
    def attach_pose(self) -> Pose:
        """Pose of F_o (front-face centre) in F_i while on the wall."""
        return Pose(np.asarray(self.position), np.asarray(self.rotation))

    @property
    def centre_of_gravity(self) -> Vector:
        """Centre of gravity in F_o."""
        return np.array([0.0, 0.0, 0.5 * self.length])

    def problems(self, prefix: str = "object") -> List[str]:
        found: List[str] = []
        if not np.isfinite(self.mass) or self.mass < 0.0:
            found.append(f"{prefix}.mass must be >= 0 (got {self.mass})")
        _check_positive(found, f"{prefix}.radius", self.radius)
        _check_positive(found, f"{prefix}.length", self.length)
        _check_finite(found, f"{prefix}.position", self.position)
        if not is_rotation(np.asarray(self.rotation, dtype=float)):
            found.append(f"{prefix}.rotation must be a rotation matrix")
        if self.pose_noise_std < 0.0:
            found.append(f"{prefix}.pose_noise_std must be >= 0")
        return found


def _frozen_vec(values, size: int = 3) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(size)
    array.setflags(write=False)
    return array


# Layout of the continuous part of SystemState inside the integrator vector.
SLICE_UAV_POSITION = slice(0, 3)
SLICE_UAV_VELOCITY = slice(3, 6)
SLICE_UAV_ROTATION = slice(6, 15)
SLICE_UAV_RATES = slice(15, 18)
SLICE_EE_POSITION = slice(18, 21)
SLICE_EE_VELOCITY = slice(21, 24)
INDEX_APERTURE = 24
INDEX_APERTURE_RATE = 25
SLICE_SUPPLY = slice(26, 29)
SLICE_DISSIPATION = slice(29, 32)
STATE_SIZE = 32

SUBSYSTEMS = ("uav", "manipulator", "gripper")


@dataclass(frozen=True)
class SystemState:
    """
    Full simulation state.

    supply and dissipation accumulate ∫d·ṗ dt and ∫ṗ·D·ṗ dt for the UAV,
    manipulator and gripper closed loops (in that order).
    """

    uav_position: Vector
    uav_velocity: Vector
    uav_rotation: Matrix
    uav_rates: Vector
    ee_position: Vector
    ee_velocity: Vector
    aperture: float
    aperture_rate: float
    object_pose: Pose
    mission: MissionPhase = MissionPhase.FREE_FLIGHT
    supply: Vector = field(default_factory=lambda: np.zeros(3))
    dissipation: Vector = field(default_factory=lambda: np.zeros(3))
    grasp_offset: Optional[Pose] = None

    def __post_init__(self):
        for name in (
            "uav_position",
            "uav_velocity",
            "uav_rates",
            "ee_position",
            "ee_velocity",
            "supply",
            "dissipation",
        ):
            object.__setattr__(self, name, _frozen_vec(getattr(self, name)))
        rotation = np.array(self.uav_rotation, dtype=float).reshape(3, 3)
        rotation.setflags(write=False)
        object.__setattr__(self, "uav_rotation", rotation)
        object.__setattr__(self, "aperture", float(self.aperture))
        object.__setattr__(self, "aperture_rate", float(self.aperture_rate))

    @property
    def uav_pose(self) -> Pose:
        return Pose(self.uav_position, self.uav_rotation)

    def as_vector(self) -> np.ndarray:
        """Continuous part of the state as a flat vector for the integrators."""
        x = np.empty(STATE_SIZE)
        x[SLICE_UAV_POSITION] = self.uav_position
        x[SLICE_UAV_VELOCITY] = self.uav_velocity
        x[SLICE_UAV_ROTATION] = self.uav_rotation.reshape(9)
        x[SLICE_UAV_RATES] = self.uav_rates
        x[SLICE_EE_POSITION] = self.ee_position
        x[SLICE_EE_VELOCITY] = self.ee_velocity
        x[INDEX_APERTURE] = self.aperture
        x[INDEX_APERTURE_RATE] = self.aperture_rate
        x[SLICE_SUPPLY] = self.supply
        x[SLICE_DISSIPATION] = self.dissipation
        return x

    def with_vector(self, x: np.ndarray) -> "SystemState":
        """New state with the continuous part taken from x."""
        return replace(
            self,
            uav_position=x[SLICE_UAV_POSITION],
            uav_velocity=x[SLICE_UAV_VELOCITY],
            uav_rotation=x[SLICE_UAV_ROTATION].reshape(3, 3),
            uav_rates=x[SLICE_UAV_RATES],
            ee_position=x[SLICE_EE_POSITION],
            ee_velocity=x[SLICE_EE_VELOCITY],
            aperture=x[INDEX_APERTURE],
            aperture_rate=x[INDEX_APERTURE_RATE],
            supply=x[SLICE_SUPPLY],
            dissipation=x[SLICE_DISSIPATION],
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))

    def problems(
        self,
        manipulator: ManipulatorParams,
        gripper: GripperParams,
        tolerance: float = 1e-3,
    ) -> List[str]:
        """
        Invariant violations of this state.

        The workspace and aperture stops are stiff springs, so positions may
        exceed the nominal box by the stop compliance; `tolerance` absorbs it.
        """
        found: List[str] = []
        if not self.is_finite():
            found.append("state contains non-finite values")
        if not is_rotation(self.uav_rotation, 1e-9):
            found.append("UAV attitude is not a rotation matrix")
        if np.any(self.ee_position < manipulator.lower - tolerance) or np.any(
            self.ee_position > manipulator.upper + tolerance
        ):
            found.append("end-effector outside the manipulator workspace")
        if not (
            gripper.aperture_min - tolerance
            <= self.aperture
            <= gripper.aperture_max + tolerance
        ):
            found.append("gripper aperture outside its range")
        return found


def initial_state(
    uav_position: Vector,
    manipulator: ManipulatorParams,
    gripper: GripperParams,
    obj: ObjectParams,
    ee_position: Optional[Vector] = None,
) -> SystemState:
    """Level hover at `uav_position`, arm at its nominal point, hand open."""
    return SystemState(
        uav_position=np.asarray(uav_position, dtype=float),
        uav_velocity=np.zeros(3),
        uav_rotation=np.eye(3),
        uav_rates=np.zeros(3),
        ee_position=manipulator.nominal if ee_position is None else ee_position,
        ee_velocity=np.zeros(3),
        aperture=gripper.open_aperture,
        aperture_rate=0.0,
        object_pose=obj.attach_pose,
    )


@dataclass(frozen=True)
class EndEffectorKinematics:
    """Palm frame F_e seen from the inertial frame."""

    pose: Pose
    velocity: Vector
    offset_body: Vector
    offset_rate_body: Vector
    angular_velocity: Vector


def end_effector_kinematics(
    state: SystemState, manipulator: ManipulatorParams
) -> EndEffectorKinematics:
    """
    Compose F_i ← F_b ← F_m ← F_e for the current state.

    :return: palm pose in F_i, its inertial velocity, its offset r and rate ṙ
        in F_b, and the inertial angular velocity of the (rigidly rotating) palm.
    """
    R_b = state.uav_rotation
    R_m = np.asarray(manipulator.mount_rotation, dtype=float)
    mount = np.asarray(manipulator.mount_position, dtype=float)
    offset = mount + R_m @ state.ee_position
    offset_rate = R_m @ state.ee_velocity
    omega = state.uav_rates
    position = state.uav_position + R_b @ offset
    velocity = state.uav_velocity + R_b @ (cross(omega, offset) + offset_rate)
    return EndEffectorKinematics(
        pose=Pose(position, R_b @ R_m),
        velocity=velocity,
        offset_body=offset,
        offset_rate_body=offset_rate,
        angular_velocity=R_b @ omega,
    )


def end_effector_mass(
    mission: MissionPhase,
    manipulator: ManipulatorParams,
    gripper: GripperParams,
    obj: ObjectParams,
) -> float:
    """Point mass carried at the palm: arm and gripper, plus the object once grasped."""
    mass = manipulator.mass + gripper.phalange_mass
    if mission is MissionPhase.AERIAL_GRASP:
        mass += obj.mass
    return mass
