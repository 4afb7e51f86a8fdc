/**
 * Frame capture at a nominal 7 frames per second.
 *
 * A tick timer fires every 1000/7 ms and snapshots the most recent sensor
 * readings (nearest-sample downsampling). Real hardware feeds the snapshot
 * via devicemotion/deviceorientation events; demo mode computes it from the
 * synthetic source instead.
 */

import { DemoSignalSource } from "./demo";
import { SensorSnapshot, buildFrame } from "./frames";
import type { CaptureMachine } from "./state";
import type { MotionType } from "./types";

export const CAPTURE_RATE_HZ = 7;
export const TICK_MS = 1000 / CAPTURE_RATE_HZ;

export interface CaptureOptions {
  /** Seconds since the Unix epoch; injectable for tests. */
  clock?: () => number;
  demoSeed?: number;
}

export class PermissionDeniedError extends Error {}

interface SnapshotProvider {
  start(): Promise<void>;
  stop(): void;
  current(tSeconds: number): SensorSnapshot | null;
}

/** Live browser sensors; remembers the latest event payloads per tick. */
class DeviceMotionProvider implements SnapshotProvider {
  private latest: SensorSnapshot = {};
  private seenMotion = false;
  private readonly onMotion = (event: DeviceMotionEvent) => {
    this.seenMotion = true;
    const g = event.accelerationIncludingGravity;
    const a = event.acceleration;
    const r = event.rotationRate;
    if (g && g.x !== null) this.latest.accelerometer = [g.x ?? 0, g.y ?? 0, g.z ?? 0];
    if (a && a.x !== null) this.latest.linearAcceleration = [a.x ?? 0, a.y ?? 0, a.z ?? 0];
    if (r && r.alpha !== null) {
      const toRad = Math.PI / 180;
      this.latest.gyroscope = [(r.beta ?? 0) * toRad, (r.gamma ?? 0) * toRad, (r.alpha ?? 0) * toRad];
    }
  };
  private readonly onOrientation = (event: DeviceOrientationEvent) => {
    if (event.beta === null) return;
    const toRad = Math.PI / 180;
    // beta/gamma/alpha map onto roll-x / pitch-y / yaw-z
    this.latest.euler = [
      (event.beta ?? 0) * toRad,
      (event.gamma ?? 0) * toRad,
      (event.alpha ?? 0) * toRad,
    ];
  };

  async start(): Promise<void> {
    const motionCtor = (globalThis as any).DeviceMotionEvent;
    if (!motionCtor) {
      throw new PermissionDeniedError("this device exposes no motion sensors");
    }
    if (typeof motionCtor.requestPermission === "function") {
      const answer = await motionCtor.requestPermission();
      if (answer !== "granted") {
        throw new PermissionDeniedError("motion sensor permission denied");
      }
    }
    addEventListener("devicemotion", this.onMotion as EventListener);
    addEventListener("deviceorientation", this.onOrientation as EventListener);
  }

  stop(): void {
    removeEventListener("devicemotion", this.onMotion as EventListener);
    removeEventListener("deviceorientation", this.onOrientation as EventListener);
  }

  current(): SensorSnapshot | null {
    return this.seenMotion ? this.latest : null;
  }
}

class DemoProvider implements SnapshotProvider {
  private source: DemoSignalSource;
  private startedAt: number | null = null;

  constructor(motion: MotionType, seed: number) {
    this.source = new DemoSignalSource(motion, seed);
  }

  async start(): Promise<void> {}

  stop(): void {}

  current(tSeconds: number): SensorSnapshot {
    if (this.startedAt === null) this.startedAt = tSeconds;
    return this.source.snapshotAt(tSeconds - this.startedAt);
  }
}

export class CaptureController {
  readonly machine: CaptureMachine;
  private readonly clock: () => number;
  private readonly demoSeed: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private provider: SnapshotProvider | null = null;
  private startedAt = 0;

  constructor(machine: CaptureMachine, options: CaptureOptions = {}) {
    this.machine = machine;
    this.clock = options.clock ?? (() => Date.now() / 1000);
    this.demoSeed = options.demoSeed ?? 1;
  }

  get demoModeAvailable(): boolean {
    return !(globalThis as any).DeviceMotionEvent;
  }

  /** Begin recording; falls back to demo mode when asked or sensorless. */
  async startCapture(demo = false): Promise<void> {
    const motion = this.machine.state.motion;
    this.machine.start();
    const provider: SnapshotProvider =
      demo || this.demoModeAvailable
        ? new DemoProvider(motion as MotionType, this.demoSeed)
        : new DeviceMotionProvider();
    try {
      await provider.start();
    } catch (err) {
      this.machine.sensorFailed(err instanceof Error ? err.message : String(err));
      throw err;
    }
    this.provider = provider;
    this.startedAt = this.clock();
    this.timer = setInterval(() => this.tick(), TICK_MS);
  }

  private tick(): void {
    if (!this.provider || this.machine.state.status !== "recording") return;
    const now = this.clock();
    const snapshot = this.provider.current(now);
    if (!snapshot) return; // no sensor event yet
    this.machine.recordFrame(buildFrame(snapshot, now));
    const elapsed = now - this.startedAt;
    if (elapsed > 0) {
      this.machine.state.framesPerSecond = this.machine.state.buffer.length / elapsed;
    }
  }

  stopCapture(): number {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.provider?.stop();
    this.provider = null;
    this.machine.stop();
    return this.machine.state.buffer.length;
  }
}
