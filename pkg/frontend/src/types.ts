export const MOTION_TYPES = [
  "overhead_press",
  "bicep_curls",
  "lateral_raise",
  "overhead_triceps",
  "diagonal_shoulder_raise",
  "forward_punches",
  "reverse_fly",
  "seated_rows",
  "modified_skull_crushers",
] as const;

export type MotionType = (typeof MOTION_TYPES)[number];
export type HandSide = "left" | "right";

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

/** Sensor groups in wire order; bit i of availability_mask covers group i. */
export const SENSOR_GROUPS = [
  "accelerometer",
  "magnetometer",
  "gyroscope",
  "linear_accelerometer",
  "gravity",
  "euler",
  "quaternion",
  "inverse_quaternion",
  "relative_orientation",
] as const;

export type SensorGroup = (typeof SENSOR_GROUPS)[number];

export const FULL_AVAILABILITY = (1 << SENSOR_GROUPS.length) - 1;

export function groupBit(group: SensorGroup): number {
  return 1 << SENSOR_GROUPS.indexOf(group);
}

/** One frame in the ingest service's JSON wire format. */
export interface FrameJson {
  timestamp: number;
  accelerometer: Vec3;
  magnetometer: Vec3;
  gyroscope: Vec3;
  linear_accelerometer: Vec3;
  gravity: Vec3;
  euler: Vec3;
  quaternion: Quat;
  inverse_quaternion: Quat;
  relative_orientation: Vec3;
  availability_mask: number;
}

export interface SessionLabels {
  respondent: string;
  motion: MotionType;
  side: HandSide;
}
