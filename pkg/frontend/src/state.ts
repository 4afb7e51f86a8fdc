/**
 * Capture UI state machine.
 *
 * Legal flow: idle -> recording -> stopped -> syncing -> done, with error
 * self-loops (a failed sync returns to stopped with the buffer intact, a
 * sensor failure returns to idle). "done" behaves like idle for starting
 * the next recording.
 */

import type { FrameJson, HandSide, MotionType } from "./types";

export type CaptureStatus = "idle" | "recording" | "stopped" | "syncing" | "done";

export interface CaptureState {
  respondent: string;
  motion: MotionType | null;
  side: HandSide | null;
  status: CaptureStatus;
  buffer: FrameJson[];
  framesPerSecond: number;
  serverUrl: string;
  error: string | null;
  syncedCount: number;
}

export function initialState(serverUrl = "http://localhost:8080"): CaptureState {
  return {
    respondent: "",
    motion: null,
    side: null,
    status: "idle",
    buffer: [],
    framesPerSecond: 0,
    serverUrl,
    error: null,
    syncedCount: 0,
  };
}

export function canStart(state: CaptureState): boolean {
  return (
    (state.status === "idle" || state.status === "done") &&
    state.respondent.trim().length > 0 &&
    state.motion !== null &&
    state.side !== null
  );
}

export function canStop(state: CaptureState): boolean {
  return state.status === "recording";
}

export function canSync(state: CaptureState): boolean {
  return state.status === "stopped" && state.buffer.length > 0;
}

export class IllegalTransition extends Error {
  constructor(from: CaptureStatus, event: string) {
    super(`cannot ${event} while ${from}`);
  }
}

export class CaptureMachine {
  state: CaptureState;

  constructor(serverUrl?: string) {
    this.state = initialState(serverUrl);
  }

  configure(update: Partial<Pick<CaptureState, "respondent" | "motion" | "side" | "serverUrl">>): void {
    if (this.state.status === "recording" || this.state.status === "syncing") {
      throw new IllegalTransition(this.state.status, "reconfigure");
    }
    Object.assign(this.state, update);
  }

  start(): void {
    if (!canStart(this.state)) {
      throw new IllegalTransition(this.state.status, "start");
    }
    this.state.status = "recording";
    this.state.buffer = [];
    this.state.error = null;
    this.state.syncedCount = 0;
  }

  recordFrame(frame: FrameJson): void {
    if (this.state.status !== "recording") {
      throw new IllegalTransition(this.state.status, "record");
    }
    this.state.buffer.push(frame);
  }

  stop(): void {
    if (!canStop(this.state)) {
      throw new IllegalTransition(this.state.status, "stop");
    }
    this.state.status = "stopped";
  }

  beginSync(): void {
    if (!canSync(this.state)) {
      throw new IllegalTransition(this.state.status, "sync");
    }
    this.state.status = "syncing";
    this.state.error = null;
  }

  /** Buffer is released only once the server acknowledged every batch. */
  syncSucceeded(confirmed: number): void {
    if (this.state.status !== "syncing") {
      throw new IllegalTransition(this.state.status, "finish sync");
    }
    this.state.syncedCount = confirmed;
    this.state.buffer = [];
    this.state.status = "done";
  }

  /** Error self-loop: back to stopped, frames preserved for a retry. */
  syncFailed(message: string): void {
    if (this.state.status !== "syncing") {
      throw new IllegalTransition(this.state.status, "fail sync");
    }
    this.state.error = message;
    this.state.status = "stopped";
  }

  /** Error self-loop for sensor failures during recording. */
  sensorFailed(message: string): void {
    if (this.state.status !== "recording") {
      throw new IllegalTransition(this.state.status, "fail sensors");
    }
    this.state.error = message;
    this.state.buffer = [];
    this.state.status = "idle";
  }
}
