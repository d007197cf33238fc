"""Small-vector math shared by every other module.

3-vectors are plain ``numpy`` arrays of shape ``(3,)``; rotations are unit
quaternions stored w-first as shape ``(4,)`` arrays and renormalized after
every composition so drift never accumulates.  Algebraic identities hold to
1e-9, trigonometric constructions to 1e-7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64
Quat = np.ndarray  # shape (4,), float64, (w, x, y, z)

_UNIT_TOL = 1e-9


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def quat_identity() -> Quat:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> Quat:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n

def quat_multiply(a: Quat, b: Quat) -> Quat:
    """Compose two rotations (a after b); result is renormalized."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    q = np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )
    return quat_normalize(q)


def quat_conjugate(q: Quat) -> Quat:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate vector *v* by unit quaternion *q*."""
    w = q[0]
    u = q[1:]
    # v' = v + 2w(u x v) + 2(u x (u x v))
    uv = np.cross(u, v)
    return v + 2.0 * w * uv + 2.0 * np.cross(u, uv)


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = math.cos(half)
    q[1:] = (math.sin(half) / n) * axis
    return q


def quat_to_matrix(q: Quat) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def shortest_arc(u: Vec3, v: Vec3) -> Quat:
    """Minimal rotation mapping unit vector *u* onto unit vector *v*.

    The antiparallel case is resolved deterministically: rotate 180 degrees
    about the normalized cross product of *u* with the standard basis vector
    least aligned with *u* (ties broken toward the lowest axis index).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = float(np.dot(u, v))
    if d < -1.0 + _UNIT_TOL:
        k = int(np.argmin(np.abs(u)))  # argmin returns the lowest tied index
        axis = np.cross(u, np.eye(3)[k])
        return quat_from_axis_angle(axis, math.pi)
    c = np.cross(u, v)
    q = np.array([1.0 + d, c[0], c[1], c[2]])
    return quat_normalize(q)


@dataclass
class Pose:
    """6-DoF rigid pose of a hand tracker: world position plus orientation."""

    position: Vec3
    orientation: Quat = field(default_factory=quat_identity)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,) or not np.all(np.isfinite(self.position)):
            raise ValueError("pose position must be a finite 3-vector")
        self.orientation = quat_normalize(self.orientation)

    def transform_point(self, local: Vec3) -> Vec3:
        """Map a point from the tracker-local frame into world space."""
        return self.position + quat_rotate(self.orientation, local)

    def inverse_transform_point(self, world: Vec3) -> Vec3:
        """Map a world point into the tracker-local frame."""
        return quat_rotate(quat_conjugate(self.orientation), world - self.position)


@dataclass
class Similarity:
    """Uniform scale, then rotation, then translation: p -> R(s*p) + t."""

    scale: float = 1.0
    rotation: Quat = field(default_factory=quat_identity)
    translation: Vec3 = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.scale = float(self.scale)
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"similarity scale must be positive, got {self.scale}")
        self.rotation = quat_normalize(self.rotation)
        self.translation = np.asarray(self.translation, dtype=float)
        if self.translation.shape != (3,):
            raise ValueError("similarity translation must be a 3-vector")

    @staticmethod
    def identity() -> "Similarity":
        return Similarity()

    def apply(self, p: Vec3) -> Vec3:
        return quat_rotate(self.rotation, self.scale * np.asarray(p, dtype=float)) + self.translation

    def compose(self, other: "Similarity") -> "Similarity":
        """Return the transform applying *other* first, then self."""
        return Similarity(
            scale=self.scale * other.scale,
            rotation=quat_multiply(self.rotation, other.rotation),
            translation=quat_rotate(self.rotation, self.scale * other.translation) + self.translation,
        )

    def inverse(self) -> "Similarity":
        inv_rot = quat_conjugate(self.rotation)
        inv_scale = 1.0 / self.scale
        return Similarity(
            scale=inv_scale,
            rotation=inv_rot,
            translation=-inv_scale * quat_rotate(inv_rot, self.translation),
        )


def similarity_apply(t: Similarity, p: Vec3) -> Vec3:
    return t.apply(p)


def similarity_compose(a: Similarity, b: Similarity) -> Similarity:
    """Transform equivalent to applying *b* first, then *a*."""
    return a.compose(b)
