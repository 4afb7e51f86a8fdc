/** DOM wiring for the capture page. */

import { CaptureController } from "./capture";
import { CaptureMachine, canStart, canStop, canSync } from "./state";
import { IngestClient, syncBuffer } from "./sync";
import { HandSide, MOTION_TYPES, MotionType } from "./types";

const machine = new CaptureMachine();
const controller = new CaptureController(machine);

const el = {
  name: document.querySelector<HTMLInputElement>("#respondent")!,
  motion: document.querySelector<HTMLSelectElement>("#motion")!,
  side: document.querySelectorAll<HTMLInputElement>("input[name=side]"),
  server: document.querySelector<HTMLInputElement>("#server")!,
  demo: document.querySelector<HTMLInputElement>("#demo")!,
  start: document.querySelector<HTMLButtonElement>("#start")!,
  stop: document.querySelector<HTMLButtonElement>("#stop")!,
  sync: document.querySelector<HTMLButtonElement>("#sync")!,
  status: document.querySelector<HTMLElement>("#status")!,
  gauge: document.querySelector<HTMLElement>("#gauge")!,
};

for (const motion of MOTION_TYPES) {
  const option = document.createElement("option");
  option.value = motion;
  option.textContent = motion.replaceAll("_", " ");
  el.motion.appendChild(option);
}
el.motion.value = "";

if (controller.demoModeAvailable) {
  el.demo.checked = true;
  el.demo.disabled = true;
  el.demo.title = "no motion sensors found; demo mode forced";
}

function selectedSide(): HandSide | null {
  for (const radio of el.side) {
    if (radio.checked) return radio.value as HandSide;
  }
  return null;
}

function readForm(): void {
  machine.configure({
    respondent: el.name.value,
    motion: (el.motion.value || null) as MotionType | null,
    side: selectedSide(),
    serverUrl: el.server.value || machine.state.serverUrl,
  });
}

function render(): void {
  const s = machine.state;
  el.start.disabled = !canStart(s);
  el.stop.disabled = !canStop(s);
  el.sync.disabled = !canSync(s);
  const parts = [`status: ${s.status}`, `buffered: ${s.buffer.length}`];
  if (s.syncedCount) parts.push(`synced: ${s.syncedCount}`);
  if (s.error) parts.push(`error: ${s.error}`);
  el.status.textContent = parts.join(" | ");
  el.gauge.textContent = s.status === "recording" ? `${s.framesPerSecond.toFixed(1)} frames/s` : "";
}

let gaugeTimer: number | null = null;

el.name.addEventListener("input", () => {
  readForm();
  render();
});
el.motion.addEventListener("change", () => {
  readForm();
  render();
});
for (const radio of el.side) {
  radio.addEventListener("change", () => {
    readForm();
    render();
  });
}

el.start.addEventListener("click", async () => {
  readForm();
  try {
    await controller.startCapture(el.demo.checked);
  } catch {
    render();
    return;
  }
  gaugeTimer = window.setInterval(render, 250);
  render();
});

el.stop.addEventListener("click", () => {
  if (gaugeTimer !== null) {
    clearInterval(gaugeTimer);
    gaugeTimer = null;
  }
  controller.stopCapture();
  render();
});

el.sync.addEventListener("click", async () => {
  readForm();
  const s = machine.state;
  const labels = {
    respondent: s.respondent,
    motion: s.motion as MotionType,
    side: s.side as HandSide,
  };
  const frames = [...s.buffer];
  machine.beginSync();
  render();
  try {
    const result = await syncBuffer(new IngestClient(s.serverUrl), labels, frames);
    machine.syncSucceeded(result.confirmed);
  } catch (err) {
    machine.syncFailed(err instanceof Error ? err.message : String(err));
  }
  render();
});

render();
