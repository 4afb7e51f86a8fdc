/** Building wire frames from whatever sensor channels are actually readable. */

import { eulerToQuaternion, gravityFromEuler, quaternionInverse } from "./rotations";
import {
  FULL_AVAILABILITY,
  FrameJson,
  SENSOR_GROUPS,
  SensorGroup,
  Vec3,
  groupBit,
} from "./types";

/** A point-in-time reading; missing entries become zero-filled groups. */
export interface SensorSnapshot {
  accelerometer?: Vec3;
  magnetometer?: Vec3;
  gyroscope?: Vec3;
  linearAcceleration?: Vec3;
  gravity?: Vec3;
  euler?: Vec3;
  relativeOrientation?: Vec3;
}

const ZERO3: Vec3 = [0, 0, 0];

/**
 * Assemble a full frame from a snapshot.
 *
 * Derived groups: the quaternion comes from the Euler reading, its inverse
 * from the reciprocal rule, and gravity from the Euler attitude when no
 * gravity sensor exists. Groups with no source stay zero-filled with their
 * availability bit cleared.
 */
export function buildFrame(snapshot: SensorSnapshot, timestamp: number): FrameJson {
  let mask = FULL_AVAILABILITY;
  const drop = (group: SensorGroup) => {
    mask &= ~groupBit(group);
  };

  const accelerometer = snapshot.accelerometer ?? (drop("accelerometer"), ZERO3);
  const magnetometer = snapshot.magnetometer ?? (drop("magnetometer"), ZERO3);
  const gyroscope = snapshot.gyroscope ?? (drop("gyroscope"), ZERO3);
  const linear = snapshot.linearAcceleration ?? (drop("linear_accelerometer"), ZERO3);
  const relative = snapshot.relativeOrientation ?? (drop("relative_orientation"), ZERO3);

  let euler = snapshot.euler;
  let quaternion: FrameJson["quaternion"];
  let inverse: FrameJson["inverse_quaternion"];
  let gravity = snapshot.gravity;

  if (euler) {
    quaternion = eulerToQuaternion(euler);
    inverse = quaternionInverse(quaternion);
    gravity = gravity ?? gravityFromEuler(euler);
  } else {
    euler = (drop("euler"), ZERO3);
    quaternion = (drop("quaternion"), [0, 0, 0, 0]);
    inverse = (drop("inverse_quaternion"), [0, 0, 0, 0]);
    if (!gravity) {
      gravity = (drop("gravity"), ZERO3);
    }
  }

  return {
    timestamp,
    accelerometer: [...accelerometer],
    magnetometer: [...magnetometer],
    gyroscope: [...gyroscope],
    linear_accelerometer: [...linear],
    gravity: [...gravity],
    euler: [...euler],
    quaternion,
    inverse_quaternion: inverse,
    relative_orientation: [...relative],
    availability_mask: mask,
  };
}

/** Mirror of the server-side frame invariants, for local sanity checks. */
export function frameProblems(frame: FrameJson): string[] {
  const problems: string[] = [];
  if (!(frame.timestamp > 0) || !Number.isFinite(frame.timestamp)) {
    problems.push("timestamp");
  }
  for (const group of SENSOR_GROUPS) {
    const values = frame[group] as number[];
    if (!values.every((v) => Number.isFinite(v))) {
      problems.push(group);
    }
  }
  const q = frame.quaternion;
  const available = (frame.availability_mask & groupBit("quaternion")) !== 0;
  if (available && !(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] > 0)) {
    problems.push("quaternion");
  }
  return problems;
}
