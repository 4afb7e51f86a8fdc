import { describe, expect, it } from "vitest";

import { CaptureMachine, IllegalTransition, canStart, canStop, canSync } from "../src/state";
import type { FrameJson } from "../src/types";
import { FULL_AVAILABILITY } from "../src/types";

function fakeFrame(t = 1.0): FrameJson {
  return {
    timestamp: t,
    accelerometer: [0.1, 0.2, 9.8],
    magnetometer: [0, 0, 0],
    gyroscope: [0, 0, 0],
    linear_accelerometer: [0, 0, 0],
    gravity: [0, 0, -9.8],
    euler: [0, 0, 0],
    quaternion: [0, 0, 0, 1],
    inverse_quaternion: [0, 0, 0, 1],
    relative_orientation: [0, 0, 0],
    availability_mask: FULL_AVAILABILITY,
  };
}

function configured(): CaptureMachine {
  const machine = new CaptureMachine();
  machine.configure({ respondent: "S01", motion: "bicep_curls", side: "left" });
  return machine;
}

describe("start guard", () => {
  it("rejects start without name, motion, and side", () => {
    const machine = new CaptureMachine();
    expect(canStart(machine.state)).toBe(false);
    expect(() => machine.start()).toThrow(IllegalTransition);

    machine.configure({ respondent: "S01" });
    expect(canStart(machine.state)).toBe(false);

    machine.configure({ motion: "bicep_curls" });
    expect(canStart(machine.state)).toBe(false);

    machine.configure({ side: "left" });
    expect(canStart(machine.state)).toBe(true);
  });

  it("rejects blank-only names", () => {
    const machine = new CaptureMachine();
    machine.configure({ respondent: "   ", motion: "bicep_curls", side: "left" });
    expect(canStart(machine.state)).toBe(false);
  });
});

describe("legal flow", () => {
  it("runs idle -> recording -> stopped -> syncing -> done", () => {
    const machine = configured();
    machine.start();
    expect(machine.state.status).toBe("recording");
    machine.recordFrame(fakeFrame());
    machine.recordFrame(fakeFrame(1.1));
    machine.stop();
    expect(machine.state.status).toBe("stopped");
    expect(canSync(machine.state)).toBe(true);
    machine.beginSync();
    expect(machine.state.status).toBe("syncing");
    machine.syncSucceeded(2);
    expect(machine.state.status).toBe("done");
    expect(machine.state.buffer).toHaveLength(0);
    expect(machine.state.syncedCount).toBe(2);
    // done acts like idle for the next recording
    expect(canStart(machine.state)).toBe(true);
  });

  it("keeps the buffer on sync failure and allows a retry", () => {
    const machine = configured();
    machine.start();
    machine.recordFrame(fakeFrame());
    machine.stop();
    machine.beginSync();
    machine.syncFailed("connection refused");
    expect(machine.state.status).toBe("stopped");
    expect(machine.state.buffer).toHaveLength(1);
    expect(machine.state.error).toMatch(/refused/);
    machine.beginSync();
    machine.syncSucceeded(1);
    expect(machine.state.status).toBe("done");
  });

  it("returns to idle with an empty buffer on sensor failure", () => {
    const machine = configured();
    machine.start();
    machine.sensorFailed("permission denied");
    expect(machine.state.status).toBe("idle");
    expect(machine.state.buffer).toHaveLength(0);
    expect(machine.state.error).toMatch(/permission/);
  });
});

describe("illegal transitions", () => {
  it("cannot stop or sync from idle", () => {
    const machine = configured();
    expect(canStop(machine.state)).toBe(false);
    expect(() => machine.stop()).toThrow(IllegalTransition);
    expect(() => machine.beginSync()).toThrow(IllegalTransition);
  });

  it("cannot sync an empty buffer", () => {
    const machine = configured();
    machine.start();
    machine.stop();
    expect(canSync(machine.state)).toBe(false);
    expect(() => machine.beginSync()).toThrow(IllegalTransition);
  });

  it("cannot reconfigure while recording", () => {
    const machine = configured();
    machine.start();
    expect(() => machine.configure({ respondent: "S02" })).toThrow(IllegalTransition);
  });

  it("cannot record frames unless recording", () => {
    const machine = configured();
    expect(() => machine.recordFrame(fakeFrame())).toThrow(IllegalTransition);
  });
});
