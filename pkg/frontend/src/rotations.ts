/**
 * Orientation math matching the ingest service's conventions:
 * quaternions are (x, y, z, w); Euler angles are intrinsic Z-Y-X radians
 * stored as (roll, pitch, yaw) = (euler_x, euler_y, euler_z).
 */

import type { Quat, Vec3 } from "./types";

export const STANDARD_GRAVITY = 9.80665;

/** Unit quaternion for an Euler triple, sign-canonicalized so w >= 0. */
export function eulerToQuaternion(euler: Vec3): Quat {
  const [roll, pitch, yaw] = euler;
  const cr = Math.cos(roll / 2), sr = Math.sin(roll / 2);
  const cp = Math.cos(pitch / 2), sp = Math.sin(pitch / 2);
  const cy = Math.cos(yaw / 2), sy = Math.sin(yaw / 2);

  const w = cr * cp * cy + sr * sp * sy;
  const x = sr * cp * cy - cr * sp * sy;
  const y = cr * sp * cy + sr * cp * sy;
  const z = cr * cp * sy - sr * sp * cy;

  const norm = Math.sqrt(x * x + y * y + z * z + w * w);
  let q: Quat = [x / norm, y / norm, z / norm, w / norm];
  for (const component of [q[3], q[0], q[1], q[2]]) {
    if (component > 0) return q;
    if (component < 0) return [-q[0], -q[1], -q[2], -q[3]];
  }
  return q;
}

/** Reciprocal quaternion conj(q) / |q|^2. */
export function quaternionInverse(q: Quat): Quat {
  const [x, y, z, w] = q;
  const normSq = x * x + y * y + z * z + w * w;
  if (normSq <= 0) {
    throw new Error("cannot invert the zero quaternion");
  }
  return [-x / normSq, -y / normSq, -z / normSq, w / normSq];
}

export function hamiltonProduct(a: Quat, b: Quat): Quat {
  const [ax, ay, az, aw] = a;
  const [bx, by, bz, bw] = b;
  return [
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
    aw * bw - ax * bx - ay * by - az * bz,
  ];
}

/** World gravity (0, 0, -g) expressed in the device frame; yaw cancels. */
export function gravityFromEuler(euler: Vec3, g: number = STANDARD_GRAVITY): Vec3 {
  const [roll, pitch] = euler;
  return [
    g * Math.sin(pitch),
    -g * Math.cos(pitch) * Math.sin(roll),
    -g * Math.cos(pitch) * Math.cos(roll),
  ];
}
