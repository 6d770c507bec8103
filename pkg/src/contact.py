"""
Hunt-Crossley contact between the hand and the wall-mounted object.

Seven contacts are resolved: the six phalange points (two per finger) on the
cylindrical surface of the object and the palm on its front face. Each contact
frame has its z axis along the inward surface normal, and every contact force
is the force the hand applies to the object, stacked as [t1, t2, n].
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.errors import ContactGeometryError
from src.model import (
    GripperParams,
    ManipulatorParams,
    ObjectParams,
    SystemState,
    end_effector_kinematics,
)
from src.spatial_math import Frame, Matrix, Pose, Vector, Wrench, cross, skew

CONTACT_NAMES = ("f1", "f2", "f3", "f4", "f5", "f6", "palm")
N_CONTACTS = len(CONTACT_NAMES)
FORCE_SIZE = 3 * N_CONTACTS


@dataclass(frozen=True)
class ContactParams:
    """Contact law, friction and wall attachment parameters."""

    stiffness: float = 5000.0
    exponent: float = 1.5
    damping: float = 0.5
    friction: float = 0.8
    v_reg: float = 0.01
    breakaway_force: float = 5.0
    grasp_threshold: float = 0.1
    grasp_debounce: float = 0.05

    def problems(self, prefix: str = "contact") -> List[str]:
        found: List[str] = []
        if not self.stiffness > 0.0:
            found.append(f"{prefix}.stiffness must be > 0 (got {self.stiffness})")
        if not self.exponent >= 1.0:
            found.append(f"{prefix}.exponent must be >= 1 (got {self.exponent})")
        if not self.damping >= 0.0:
            found.append(f"{prefix}.damping must be >= 0 (got {self.damping})")
        if not self.friction >= 0.0:
            found.append(f"{prefix}.friction must be >= 0 (got {self.friction})")
        if not self.v_reg > 0.0:
            found.append(f"{prefix}.v_reg must be > 0 (got {self.v_reg})")
        if not self.breakaway_force > 0.0:
            found.append(
                f"{prefix}.breakaway_force must be > 0 (got {self.breakaway_force})"
            )
        if not self.grasp_threshold >= 0.0:
            found.append(f"{prefix}.grasp_threshold must be >= 0")
        if not self.grasp_debounce >= 0.0:
            found.append(f"{prefix}.grasp_debounce must be >= 0")
        return found


@dataclass(frozen=True)
class ContactGeometry:
    """Object cylinder and gripper finger layout used to place the contacts."""

    radius: float
    length: float
    finger_angles: Tuple[float, ...]
    phalange_offsets: Tuple[float, ...]

    @classmethod
    def from_params(
        cls, gripper: GripperParams, obj: ObjectParams
    ) -> "ContactGeometry":
        return cls(
            radius=obj.radius,
            length=obj.length,
            finger_angles=tuple(np.radians(gripper.finger_angles_deg)),
            phalange_offsets=tuple(gripper.phalange_offsets),
        )

    def phalange_points(self, aperture: float) -> List[Tuple[Vector, Vector]]:
        """
        Phalange contact points in F_e and their opening directions.

        Fingers are ordered by angle, phalanges from the palm outwards, so
        f1/f2 belong to the first finger.
        """
        points = []
        for angle in self.finger_angles:
            radial = np.array([np.cos(angle), np.sin(angle), 0.0])
            for offset in self.phalange_offsets:
                local = aperture * radial + np.array([0.0, 0.0, offset])
                points.append((local, radial))
        return points


@dataclass(frozen=True)
class ContactPoint:
    """
    One resolved contact.

    pose is the contact frame in F_o (z = inward normal). force is the force
    the hand applies to the object in that frame, ordered [t1, t2, n].
    """

    name: str
    pose: Pose
    penetration: float = 0.0
    penetration_rate: float = 0.0
    tangential_velocity: Vector = field(default_factory=lambda: np.zeros(3))
    force: Vector = field(default_factory=lambda: np.zeros(3))

    @property
    def normal_force(self) -> float:
        return float(self.force[2])

    @property
    def tangential_force(self) -> float:
        return float(np.hypot(self.force[0], self.force[1]))

    @property
    def active(self) -> bool:
        return self.penetration > 0.0


@dataclass(frozen=True)
class ContactSet:
    """The seven contacts in CONTACT_NAMES order."""

    points: Tuple[ContactPoint, ...]

    @classmethod
    def empty(cls) -> "ContactSet":
        return cls(tuple(ContactPoint(name, Pose()) for name in CONTACT_NAMES))

    @property
    def forces(self) -> Vector:
        """Stacked f_c ∈ R^21."""
        return np.concatenate([p.force for p in self.points])

    @property
    def frames(self) -> List[Pose]:
        return [p.pose for p in self.points]

    @property
    def palm(self) -> ContactPoint:
        return self.points[-1]

    @property
    def phalanges(self) -> Tuple[ContactPoint, ...]:
        return self.points[:-1]

    @property
    def max_penetration(self) -> float:
        return max(p.penetration for p in self.points)

    @property
    def any_active(self) -> bool:
        return any(p.active for p in self.points)


@dataclass(frozen=True)
class WallAttachment:
    """Breakable attachment of the object to the wall."""

    pose: Pose
    breakaway_force: float
    attached: bool = True
    pending_since: Optional[float] = None


# ================================================
# Contact laws
# ================================================


def hunt_crossley_normal(
    penetration: float, penetration_rate: float, params: ContactParams
) -> float:
    """
    Normal force k·δ^n·(1 + λ·δ̇), never adhesive.

    :raises ContactGeometryError: for a negative penetration.
    """
    if penetration < 0.0:
        raise ContactGeometryError(f"negative penetration {penetration:.3e} m")
    force = (
        params.stiffness
        * penetration**params.exponent
        * (1.0 + params.damping * penetration_rate)
    )
    return max(force, 0.0)


def tangential_friction(
    tangential_velocity: Vector, normal_force: float, params: ContactParams
) -> Vector:
    """Regularized Coulomb friction opposing the sliding velocity."""
    v_t = np.asarray(tangential_velocity, dtype=float)
    speed = float(np.linalg.norm(v_t))
    return -params.friction * normal_force * v_t / max(speed, params.v_reg)


# ================================================
# Contact frames and resolution
# ================================================


def _frame_from_normal(point: Vector, normal: Vector, axial: Vector) -> Pose:
    # Columns [t1, t2, n] with t1 along the axis and t1 × t2 = n.
    t2 = cross(normal, axial)
    return Pose(point, np.column_stack([axial, t2, normal]))


def contact_frames(
    ee_in_object: Pose, aperture: float, geometry: ContactGeometry
) -> List[Pose]:
    """
    Seven contact frames in F_o for the hand at `ee_in_object`.

    Phalange frames sit on the cylinder surface, radially in line with the
    phalange point; the palm frame sits on the front face under the palm.
    """
    axial = np.array([0.0, 0.0, 1.0])
    frames = []
    for local, opening in geometry.phalange_points(aperture):
        q = ee_in_object.apply(local)
        radial = np.array([q[0], q[1], 0.0])
        distance = float(np.linalg.norm(radial))
        if distance > 1e-12:
            outward = radial / distance
        else:
            outward = ee_in_object.rotation @ opening
            outward = outward - outward[2] * axial
            outward = outward / np.linalg.norm(outward)
        surface = geometry.radius * outward + np.array([0.0, 0.0, q[2]])
        frames.append(_frame_from_normal(surface, -outward, axial))
    palm = ee_in_object.position
    frames.append(Pose(np.array([palm[0], palm[1], 0.0]), np.eye(3)))
    return frames


def _resolve_point(
    name: str,
    frame: Pose,
    penetration: float,
    hand_velocity: Vector,
    params: ContactParams,
) -> ContactPoint:
    normal = frame.rotation[:, 2]
    rate = float(hand_velocity @ normal)
    # Slip of the object surface relative to the hand.
    slip = -(hand_velocity - rate * normal)
    if penetration <= 0.0:
        return ContactPoint(name, frame, 0.0, rate, slip)
    f_n = hunt_crossley_normal(penetration, rate, params)
    f_t = tangential_friction(slip, f_n, params)
    local = frame.rotation.T @ f_t
    local[2] = f_n
    return ContactPoint(name, frame, penetration, rate, slip, local)


def resolve_contacts(
    state: SystemState,
    manipulator: ManipulatorParams,
    gripper: GripperParams,
    obj: ObjectParams,
    params: ContactParams,
) -> ContactSet:
    """
    Penetrations, rates and forces of the seven contacts for the current state.

    The object is taken at rest at `state.object_pose`; contacts that do not
    penetrate report zero force.
    """
    geometry = ContactGeometry.from_params(gripper, obj)
    kinematics = end_effector_kinematics(state, manipulator)
    to_object = state.object_pose.inverse()
    ee_in_object = to_object.compose(kinematics.pose)
    R_oi = to_object.rotation
    omega_o = R_oi @ kinematics.angular_velocity
    v_ee_o = R_oi @ kinematics.velocity
    R_eo = ee_in_object.rotation

    frames = contact_frames(ee_in_object, state.aperture, geometry)
    points = []
    phalanges = geometry.phalange_points(state.aperture)
    for index, (local, opening) in enumerate(phalanges):
        q = ee_in_object.apply(local)
        velocity = (
            v_ee_o
            + cross(omega_o, R_eo @ local)
            + R_eo @ (state.aperture_rate * opening)
        )
        radial = float(np.hypot(q[0], q[1]))
        inside = 0.0 <= q[2] <= geometry.length
        penetration = geometry.radius - radial if inside else 0.0
        points.append(
            _resolve_point(
                CONTACT_NAMES[index],
                frames[index],
                max(penetration, 0.0),
                velocity,
                params,
            )
        )

    palm = ee_in_object.position
    on_face = float(np.hypot(palm[0], palm[1])) <= geometry.radius
    palm_depth = palm[2] if on_face and palm[2] <= geometry.length else 0.0
    palm_point = _resolve_point(
        "palm", frames[-1], max(palm_depth, 0.0), v_ee_o, params
    )
    points.append(palm_point)
    return ContactSet(tuple(points))


# ================================================
# Grasp matrix and wall attachment
# ================================================


def build_grasp_matrix(frames: List[Pose]) -> Matrix:
    """
    6x21 grasp matrix with blocks [R_ci; skew(p_ci)·R_ci].

    :param frames: Seven contact frames in F_o.
    """
    if len(frames) != N_CONTACTS:
        raise ValueError(f"expected {N_CONTACTS} contact frames, got {len(frames)}")
    G = np.zeros((6, FORCE_SIZE))
    for i, frame in enumerate(frames):
        R = frame.rotation
        G[:3, 3 * i : 3 * i + 3] = R
        G[3:, 3 * i : 3 * i + 3] = skew(frame.position) @ R
    return G


def object_wrench_docked(G: Matrix, f_c: Vector) -> Wrench:
    """Object wrench (f_obj^o, M_obj^o) = G·f_c while docked."""
    G = np.asarray(G, dtype=float)
    f_c = np.asarray(f_c, dtype=float)
    if G.shape != (6, FORCE_SIZE) or f_c.shape != (FORCE_SIZE,):
        raise ValueError(
            f"grasp matrix {G.shape} and contact forces {f_c.shape} do not match "
            f"(6, {FORCE_SIZE}) and ({FORCE_SIZE},)"
        )
    w = G @ f_c
    return Wrench(w[:3], w[3:], Frame.OBJECT)


def tensile_force(pull: Wrench) -> float:
    """Force pulling the object off the wall (along −ẑ^o)."""
    return -float(pull.force[2])


def check_detach(
    pull: Wrench, attachment: WallAttachment, time: float
) -> WallAttachment:
    """
    Advance the wall attachment with the object wrench sampled at `time`.

    The object comes off once the tensile force has stayed above the
    breakaway force for one full step, i.e. on two consecutive samples.
    """
    if not attachment.attached:
        return attachment
    if tensile_force(pull) <= attachment.breakaway_force:
        return WallAttachment(attachment.pose, attachment.breakaway_force)
    if attachment.pending_since is None:
        return WallAttachment(
            attachment.pose, attachment.breakaway_force, True, pending_since=time
        )
    return WallAttachment(
        attachment.pose, attachment.breakaway_force, False, attachment.pending_since
    )
