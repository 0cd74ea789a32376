/** DOM wiring. Everything stateful lives in SessionController. */

import { ApiClient } from "./api.js";
import { chartLayout, nearestPoint } from "./chart.js";
import type { ChartLayout } from "./chart.js";
import { SessionController } from "./controller.js";
import { drawBadge, drawFrame } from "./viewer.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const serviceUrl = byId<HTMLInputElement>("service-url");
const manifestPath = byId<HTMLInputElement>("manifest-path");
const openButton = byId<HTMLButtonElement>("open-session");
const propagateButton = byId<HTMLButtonElement>("propagate");
const polarityToggle = byId<HTMLSelectElement>("polarity");
const opacitySlider = byId<HTMLInputElement>("opacity");
const frameSlider = byId<HTMLInputElement>("frame");
const frameLabel = byId<HTMLSpanElement>("frame-label");
const statusLine = byId<HTMLDivElement>("status-line");
const errorLine = byId<HTMLDivElement>("error-line");
const viewerCanvas = byId<HTMLCanvasElement>("viewer");
const chartCanvas = byId<HTMLCanvasElement>("chart");

let controller = new SessionController(new ApiClient(serviceUrl.value));
let displayImage: HTMLImageElement | null = null;
let layout: ChartLayout = { points: [], yMax: 0 };
let busy = false;

function setBusy(value: boolean): void {
  // single mutation in flight: controls disabled while the service works
  busy = value;
  propagateButton.disabled = value;
  openButton.disabled = value;
}

function showError(message: string | null): void {
  errorLine.textContent = message ?? "";
  errorLine.style.display = message ? "block" : "none";
}

function showStatus(): void {
  const s = controller.session;
  if (!s) {
    statusLine.textContent = "no session";
    return;
  }
  const date = s.dates[controller.state.currentFrame] ?? "?";
  statusLine.textContent =
    `session ${s.session_id.slice(0, 8)}  frame ${controller.state.currentFrame}` +
    `/${s.n_frames - 1}  ${date}  cursor ${s.cursor}  rev ${s.revision}  ${s.status}`;
  frameLabel.textContent = `${controller.state.currentFrame} (${date})`;
}

async function redrawViewer(): Promise<void> {
  const s = controller.session;
  const ctx = viewerCanvas.getContext("2d");
  if (!s || !ctx) return;
  const frame = controller.state.currentFrame;
  const mask = await controller.loadMask(frame).catch(() => null);

  displayImage = await loadImage(controller.api.displayUrl(s.session_id, frame))
    .catch(() => null);
  drawFrame(ctx, displayImage, mask, controller.markersAt(frame),
    controller.state.overlayOpacity, controller.gridWidth, controller.gridHeight);
  if (!mask) drawBadge(ctx, "not yet propagated");
  showStatus();
}

function redrawChart(): void {
  const ctx = chartCanvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = chartCanvas;
  ctx.clearRect(0, 0, width, height);
  layout = chartLayout(controller.areaSeries, controller.spikes, width, height);
  if (layout.points.length === 0) return;

  ctx.strokeStyle = "#4dabf7";
  ctx.lineWidth = 2;
  ctx.beginPath();
  layout.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();

  for (const p of layout.points) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, p.spike ? 6 : 3, 0, 2 * Math.PI);
    ctx.fillStyle = p.spike ? "#e03131" : "#4dabf7";
    ctx.fill();
  }
  ctx.fillStyle = "#666";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(`peak ${Math.round(layout.yMax).toLocaleString()} m²`, 8, 14);
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`cannot load ${url}`));
    img.src = url;
  });
}

openButton.addEventListener("click", async () => {
  setBusy(true);
  try {
    controller = new SessionController(new ApiClient(serviceUrl.value.replace(/\/$/, "")));
    await controller.openSession(manifestPath.value);
    const n = controller.session?.n_frames ?? 1;
    frameSlider.max = String(n - 1);
    frameSlider.value = "0";
    showError(null);
    await redrawViewer();
    redrawChart();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  } finally {
    setBusy(false);
  }
});

viewerCanvas.addEventListener("click", async (event) => {
  if (busy || !controller.session) return;
  const rect = viewerCanvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * viewerCanvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * viewerCanvas.height;
  setBusy(true);
  try {
    const accepted = await controller.clickAt(x, y, viewerCanvas.width, viewerCanvas.height);
    showError(accepted ? null : controller.lastError);
    await redrawViewer();
  } finally {
    setBusy(false);
  }
});

propagateButton.addEventListener("click", async () => {
  if (!controller.session) return;
  setBusy(true);
  try {
    await controller.propagate();
    showError(controller.lastError);
    await redrawViewer();
    redrawChart();
  } finally {
    setBusy(false);
  }
});

chartCanvas.addEventListener("click", async (event) => {
  const rect = chartCanvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * chartCanvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * chartCanvas.height;
  const hit = nearestPoint(layout, x, y);
  if (hit) {
    controller.setFrame(hit.frameIndex);
    frameSlider.value = String(hit.frameIndex);
    await redrawViewer();
  }
});

frameSlider.addEventListener("input", async () => {
  controller.setFrame(Number(frameSlider.value));
  await redrawViewer();
});

opacitySlider.addEventListener("input", async () => {
  controller.state.overlayOpacity = Number(opacitySlider.value) / 100;
  await redrawViewer();
});

polarityToggle.addEventListener("change", () => {
  controller.state.pendingPolarity =
    polarityToggle.value === "negative" ? "negative" : "positive";
});

document.addEventListener("keydown", async (event) => {
  if (!controller.session) return;
  if (event.key === "ArrowLeft" || event.key === "ArrowRight") {
    const delta = event.key === "ArrowLeft" ? -1 : 1;
    controller.setFrame(controller.state.currentFrame + delta);
    frameSlider.value = String(controller.state.currentFrame);
    await redrawViewer();
  }
});

showStatus();
