/**
 * End-to-end sync against the real ingest service (spawned as a child
 * process). Capture runs on fake timers; the network phase uses real ones.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { CaptureController } from "../src/capture";
import { CaptureMachine } from "../src/state";
import { ApiError, IngestClient, syncBuffer } from "../src/sync";
import type { FrameJson } from "../src/types";

let server: ChildProcess | null = null;
let dataDir = "";
let baseUrl = "";

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

beforeAll(async () => {
  const port = await freePort();
  dataDir = mkdtempSync(join(tmpdir(), "armsense-ui-test-"));
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    "python3",
    ["-m", "armsense.cli", "serve", "--port", String(port), "--host", "127.0.0.1", "--data-dir", dataDir],
    { stdio: "ignore" },
  );
  const client = new IngestClient(baseUrl);
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    if (await client.health()) return;
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("ingest service did not come up");
}, 40_000);

afterAll(() => {
  server?.kill("SIGTERM");
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

async function recordDemoBuffer(seconds: number): Promise<{ machine: CaptureMachine; frames: FrameJson[] }> {
  vi.useFakeTimers();
  vi.setSystemTime(new Date("2024-03-01T10:00:00Z"));
  try {
    const machine = new CaptureMachine(baseUrl);
    machine.configure({ respondent: "UI01", motion: "forward_punches", side: "right" });
    const controller = new CaptureController(machine, { demoSeed: 11 });
    await controller.startCapture(true);
    await vi.advanceTimersByTimeAsync(seconds * 1000);
    controller.stopCapture();
    return { machine, frames: [...machine.state.buffer] };
  } finally {
    vi.useRealTimers();
  }
}

describe("sync against a live ingest service", () => {
  it("ten-second demo recording lands fully on the server", async () => {
    const { machine, frames } = await recordDemoBuffer(10);
    expect(frames.length).toBeGreaterThanOrEqual(65);
    expect(frames.length).toBeLessThanOrEqual(75);

    machine.beginSync();
    const client = new IngestClient(baseUrl);
    const result = await syncBuffer(
      client,
      { respondent: "UI01", motion: "forward_punches", side: "right" },
      frames,
      { batchSize: 64 },
    );
    machine.syncSucceeded(result.confirmed);

    expect(result.confirmed).toBe(frames.length);
    expect(result.frameCount).toBe(frames.length);
    expect(machine.state.status).toBe("done");
    expect(machine.state.buffer).toHaveLength(0);
  }, 30_000);

  it("replayed batches never duplicate frames", async () => {
    const { frames } = await recordDemoBuffer(3);
    const client = new IngestClient(baseUrl);
    const sessionId = await client.createSession({
      respondent: "UI02",
      motion: "seated_rows",
      side: "left",
    });
    const first = await client.appendBatch(sessionId, 0, frames);
    const replay = await client.appendBatch(sessionId, 0, frames);
    expect(first).toBe(frames.length);
    expect(replay).toBe(0);
    const summary = await client.finishSession(sessionId);
    expect(summary.frame_count).toBe(frames.length);
  }, 30_000);

  it("validation rejections surface the offending field", async () => {
    const { frames } = await recordDemoBuffer(1);
    const broken = frames.map((f) => ({ ...f }));
    broken[0] = { ...broken[0], timestamp: -5 };
    const client = new IngestClient(baseUrl);
    const sessionId = await client.createSession({
      respondent: "UI03",
      motion: "reverse_fly",
      side: "left",
    });
    await expect(client.appendBatch(sessionId, 0, broken)).rejects.toMatchObject({
      field: "timestamp",
    });
  }, 30_000);

  it("server unreachable: buffer survives the failed sync", async () => {
    const { machine, frames } = await recordDemoBuffer(1);
    machine.beginSync();
    const dead = new IngestClient("http://127.0.0.1:9");
    await expect(
      syncBuffer(dead, { respondent: "UI04", motion: "bicep_curls", side: "left" }, frames, {
        retries: 1,
        backoffMs: 10,
      }),
    ).rejects.toBeTruthy();
    machine.syncFailed("connection refused");
    expect(machine.state.status).toBe("stopped");
    expect(machine.state.buffer).toHaveLength(frames.length);
  }, 30_000);

  it("transient failures are retried idempotently", async () => {
    const { frames } = await recordDemoBuffer(2);
    const client = new IngestClient(baseUrl);
    // fail the first append attempt after the server processed it, as a
    // dropped acknowledgement would
    let dropped = false;
    const flaky = new IngestClient(baseUrl, async (input, init) => {
      const response = await fetch(input, init);
      if (!dropped && String(input).includes("/frames")) {
        dropped = true;
        throw new TypeError("socket hang up");
      }
      return response;
    });
    const labels = { respondent: "UI05", motion: "overhead_press", side: "left" } as const;
    const result = await syncBuffer(flaky, labels, frames, {
      batchSize: 16,
      retries: 2,
      backoffMs: 5,
    });
    expect(dropped).toBe(true);
    expect(result.frameCount).toBe(frames.length);
    expect(result.confirmed).toBe(frames.length);
    void client;
  }, 30_000);

  it("client-side 4xx aborts without retries", async () => {
    const client = new IngestClient(baseUrl);
    await expect(
      client.createSession({ respondent: "", motion: "bicep_curls", side: "left" }),
    ).rejects.toBeInstanceOf(ApiError);
  }, 30_000);
});
