/**
 * Demo-mode signal source: per-motion sinusoid mixtures in the style of the
 * backend's simulator, so the UI (and its tests) work on hardware with no
 * motion sensors at all. Magnetometer and relative orientation are left
 * unavailable to mimic what browsers typically expose.
 */

import type { SensorSnapshot } from "./frames";
import { MOTION_TYPES, MotionType, Vec3 } from "./types";

const TWO_PI = 2 * Math.PI;

export class DemoSignalSource {
  private readonly classIndex: number;
  private readonly repFrequency: number;
  private readonly dominantFrequency: number;
  private readonly amplitude: number;
  private readonly phase: number;
  private rngState: number;

  constructor(motion: MotionType, seed = 1) {
    this.classIndex = MOTION_TYPES.indexOf(motion);
    const repDuration = 2.98 + 0.005 * this.classIndex;
    this.repFrequency = 1 / repDuration;
    this.dominantFrequency = (this.classIndex + 1) * this.repFrequency;
    this.amplitude = 2 + 0.25 * this.classIndex;
    this.rngState = (seed >>> 0) || 1;
    this.phase = this.nextUniform() * TWO_PI;
  }

  /** xorshift32; deterministic per seed, good enough for demo noise. */
  private nextUniform(): number {
    let x = this.rngState;
    x ^= x << 13;
    x ^= x >>> 17;
    x ^= x << 5;
    this.rngState = x >>> 0;
    return this.rngState / 0xffffffff;
  }

  private noise(sigma: number): number {
    // sum of uniforms is plenty gaussian-ish for display purposes
    return sigma * (this.nextUniform() + this.nextUniform() + this.nextUniform() - 1.5) * 2;
  }

  snapshotAt(tSeconds: number): SensorSnapshot {
    const wave = Math.sin(TWO_PI * this.dominantFrequency * tSeconds + this.phase);
    const slow = Math.sin(TWO_PI * this.repFrequency * tSeconds);
    const posture = 0.75 * (this.classIndex - 4);

    const accelerometer: Vec3 = [
      this.amplitude * (posture + wave) + this.noise(0.3),
      1.0 * slow + this.noise(0.3),
      9.3 + 0.8 * slow + this.noise(0.3),
    ];
    const gyroscope: Vec3 = [
      1.4 * slow + this.noise(0.2),
      1.1 * slow + this.noise(0.2),
      0.9 * slow + this.noise(0.2),
    ];
    const linearAcceleration: Vec3 = [
      0.8 * this.amplitude * (posture + wave) + this.noise(0.25),
      0.7 * slow + this.noise(0.25),
      0.6 * slow + this.noise(0.25),
    ];
    const euler: Vec3 = [
      0.2 * posture + 0.25 * wave + this.noise(0.03),
      0.2 * slow + this.noise(0.03),
      0.25 * posture + 0.3 * wave + this.noise(0.03),
    ];
    return { accelerometer, gyroscope, linearAcceleration, euler };
  }
}
