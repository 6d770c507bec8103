"""
Frames, rotations and wrenches shared by every other module.

Rotations are plain 3x3 numpy matrices. A Pose bundles the position and the
rotation of a frame expressed in a parent frame, and a Wrench is a force and
moment pair tagged with the frame it is expressed in.

Wrench transport follows the convention used throughout the dynamics:
force' = R·f and moment' = R·m + (R·f) × p.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import polar

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

PINV_RELATIVE_TOLERANCE = 1e-10


class Frame(Enum):
    """Reference frames of the flying hand."""

    INERTIAL = "F_i"
    BODY = "F_b"
    MANIPULATOR = "F_m"
    END_EFFECTOR = "F_e"
    FINGER_1 = "F_f1"
    FINGER_2 = "F_f2"
    FINGER_3 = "F_f3"
    FINGER_4 = "F_f4"
    FINGER_5 = "F_f5"
    FINGER_6 = "F_f6"
    OBJECT = "F_o"


def vec3(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> Vector:
    """Build a float64 3-vector."""
    return np.array([x, y, z], dtype=float)


def _frozen(values, shape) -> NDArray[np.float64]:
    array = np.array(values, dtype=float).reshape(shape)
    array.setflags(write=False)
    return array


def skew(v: Vector) -> Matrix:
    """
    Return the skew-symmetric matrix of v, so that skew(v) @ w == v × w.

    :param v: 3-vector.
    """
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(S: Matrix) -> Vector:
    """Inverse of skew for a skew-symmetric matrix."""
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def cross(a: Vector, b: Vector) -> Vector:
    """Right-handed cross product a × b."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def pinv(M: Matrix) -> Matrix:
    """
    Moore-Penrose pseudoinverse through the SVD.

    Singular values below 1e-10·σ_max are treated as zero, which keeps the
    rank-deficient grasp matrix of the underactuated gripper well behaved.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return np.linalg.pinv(M, rcond=PINV_RELATIVE_TOLERANCE)


def orthonormalize(R: Matrix) -> Matrix:
    """Project a nearly orthogonal matrix back onto SO(3) (polar factor)."""
    unitary, _ = polar(R)
    if np.linalg.det(unitary) < 0.0:
        unitary = -unitary
    return unitary


def is_rotation(R: Matrix, tol: float = 1e-9) -> bool:
    """True when R is orthonormal with determinant +1 to the given tolerance."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.allclose(R.T @ R, np.eye(3), atol=tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def rotation_about(axis: Vector, angle: float) -> Matrix:
    """Rodrigues rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_angle(R: Matrix) -> float:
    """Angle in radians of the rotation R."""
    cosine = 0.5 * (np.trace(R) - 1.0)
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


@dataclass(frozen=True)
class Pose:
    """Position and orientation of a frame with respect to its parent frame."""

    position: Vector = field(default_factory=lambda: np.zeros(3))
    rotation: Matrix = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, (3,)))
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3)))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    def compose(self, child: "Pose") -> "Pose":
        """Pose of `child` (given in this frame) expressed in this frame's parent."""
        return Pose(
            self.position + self.rotation @ child.position,
            self.rotation @ child.rotation,
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(-Rt @ self.position, Rt)

    def apply(self, point: Vector) -> Vector:
        """Map a point from this frame into the parent frame."""
        return self.position + self.rotation @ np.asarray(point, dtype=float)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.isfinite(self.position))) and is_rotation(
            self.rotation, tol
        )


@dataclass(frozen=True)
class Wrench:
    """Force (N) and moment (N·m) pair expressed in `frame`."""

    force: Vector = field(default_factory=lambda: np.zeros(3))
    moment: Vector = field(default_factory=lambda: np.zeros(3))
    frame: Frame = Frame.INERTIAL

    def __post_init__(self):
        object.__setattr__(self, "force", _frozen(self.force, (3,)))
        object.__setattr__(self, "moment", _frozen(self.moment, (3,)))

    @classmethod
    def zero(cls, frame: Frame) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3), frame)

    def __neg__(self) -> "Wrench":
        return Wrench(-self.force, -self.moment, self.frame)

    def __add__(self, other: "Wrench") -> "Wrench":
        if other.frame != self.frame:
            raise ValueError(
                f"cannot add wrenches in {self.frame.value} and {other.frame.value}"
            )
        return Wrench(self.force + other.force, self.moment + other.moment, self.frame)

    def as_vector(self) -> Vector:
        """Stacked [force, moment] 6-vector."""
        return np.concatenate([self.force, self.moment])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


def wrench_transform(
    w: Wrench, pose_of_source_in_target: Pose, target: Frame | None = None
) -> Wrench:
    """
    Express a wrench given in a source frame in a target frame.

    :param w: Wrench in the source frame.
    :param pose_of_source_in_target: Pose (p, R) of the source frame in the
        target frame.
    :param target: Frame tag of the result (defaults to the source tag).
    :return: Wrench with force R·f and moment R·m + (R·f) × p.
    """
    R = pose_of_source_in_target.rotation
    p = pose_of_source_in_target.position
    force = R @ w.force
    moment = R @ w.moment + cross(force, p)
    return Wrench(force, moment, target if target is not None else w.frame)
