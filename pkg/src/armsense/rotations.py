"""Euler/quaternion helpers shared by the capture path and the simulator.

Conventions, used consistently everywhere in this package:

- Quaternions are stored component-wise as (x, y, z, w).
- Euler angles are intrinsic Z-Y-X radians: yaw about z, then pitch about
  y, then roll about x. The triple is stored as (roll, pitch, yaw) =
  (euler_x, euler_y, euler_z).
- The rotation described by a triple maps device-frame vectors into the
  world frame via R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

from __future__ import annotations

import math
from typing import Sequence

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

STANDARD_GRAVITY = 9.80665

IDENTITY_QUAT: Quat = (0.0, 0.0, 0.0, 1.0)


class RotationDomainError(ValueError):
    """Input outside an operation's domain (zero quaternion, non-finite angle)."""


def _require_finite(name: str, values: Sequence[float]) -> None:
    for v in values:
        if not math.isfinite(v):
            raise RotationDomainError(f"{name} components must be finite, got {tuple(values)!r}")


def canonical_sign(q: Quat) -> Quat:
    """Flip the quaternion sign so w >= 0.

    q and -q encode the same rotation; picking one makes serialization
    deterministic. When w == 0 the first nonzero of (x, y, z) is made
    positive instead.
    """
    for component in (q[3], q[0], q[1], q[2]):
        if component > 0.0:
            return q
        if component < 0.0:
            return (-q[0], -q[1], -q[2], -q[3])
    return q


def euler_to_quaternion(euler: Sequence[float]) -> Quat:
    """Convert an intrinsic Z-Y-X Euler triple (radians) to a unit quaternion.

    Returns (x, y, z, w) with unit norm and canonical sign (w >= 0).
    Raises RotationDomainError on non-finite input.
    """
    _require_finite("euler", euler)
    roll, pitch, yaw = euler
    cr, sr = math.cos(roll / 2.0), math.sin(roll / 2.0)
    cp, sp = math.cos(pitch / 2.0), math.sin(pitch / 2.0)
    cy, sy = math.cos(yaw / 2.0), math.sin(yaw / 2.0)

    w = cr * cp * cy + sr * sp * sy
    x = sr * cp * cy - cr * sp * sy
    y = cr * sp * cy + sr * cp * sy
    z = cr * cp * sy - sr * sp * cy

    norm = math.sqrt(x * x + y * y + z * z + w * w)
    return canonical_sign((x / norm, y / norm, z / norm, w / norm))


def quaternion_norm(q: Sequence[float]) -> float:
    x, y, z, w = q
    return math.sqrt(x * x + y * y + z * z + w * w)


def quaternion_inverse(q: Sequence[float]) -> Quat:
    """Return the reciprocal conj(q) / ||q||^2.

    Composing q with the result under the Hamilton product gives the
    identity (0, 0, 0, 1). Raises RotationDomainError for the zero
    quaternion. The sign is not canonicalized: the inverse of a unit
    quaternion is exactly its conjugate.
    """
    _require_finite("quaternion", q)
    x, y, z, w = q
    norm_sq = x * x + y * y + z * z + w * w
    if norm_sq <= 0.0:
        raise RotationDomainError("cannot invert the zero quaternion")
    return (-x / norm_sq, -y / norm_sq, -z / norm_sq, w / norm_sq)


def hamilton_product(a: Sequence[float], b: Sequence[float]) -> Quat:
    """Hamilton product a ⊗ b for (x, y, z, w) quaternions."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return (
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    )


def gravity_from_euler(euler: Sequence[float], g: float = STANDARD_GRAVITY) -> Vec3:
    """Express world gravity (0, 0, -g) in the device frame for a given attitude.

    Closed form of R(euler)^T @ (0, 0, -g); yaw cancels because the world
    gravity vector is z-aligned. The result always has norm g.
    """
    _require_finite("euler", euler)
    if not (math.isfinite(g) and g > 0.0):
        raise RotationDomainError(f"gravity magnitude must be positive, got {g!r}")
    roll, pitch, _yaw = euler
    return (
        g * math.sin(pitch),
        -g * math.cos(pitch) * math.sin(roll),
        -g * math.cos(pitch) * math.cos(roll),
    )
