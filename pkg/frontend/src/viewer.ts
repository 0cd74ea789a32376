/**
 * Canvas rendering: grayscale NDVI underlay, translucent scar overlay,
 * prompt markers, and the "not yet propagated" badge. Pure drawing; all
 * decisions happen in the controller.
 */

import type { Marker } from "./controller.js";
import { cellToCanvasCenter } from "./coords.js";
import type { PgmMask } from "./pgm.js";

const SCAR_RGBA: [number, number, number] = [255, 120, 0];

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  display: CanvasImageSource | null,
  mask: PgmMask | null,
  markers: Marker[],
  opacity: number,
  gridWidth: number,
  gridHeight: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.imageSmoothingEnabled = false;
  if (display) {
    ctx.drawImage(display, 0, 0, width, height);
  } else {
    ctx.fillStyle = "#222";
    ctx.fillRect(0, 0, width, height);
  }

  if (mask && opacity > 0) {
    ctx.drawImage(maskToCanvas(mask, opacity), 0, 0, width, height);
  }

  for (const marker of markers) {
    const { x, y } = cellToCanvasCenter(
      marker.row, marker.col, width, height, gridWidth, gridHeight);
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fillStyle = marker.polarity === "positive" ? "#19c319" : "#e03131";
    ctx.fill();
    ctx.lineWidth = 2;
    ctx.strokeStyle = "#ffffff";
    ctx.stroke();
  }
}

export function drawBadge(ctx: CanvasRenderingContext2D, text: string): void {
  ctx.font = "14px system-ui, sans-serif";
  const metrics = ctx.measureText(text);
  const w = metrics.width + 16;
  ctx.fillStyle = "rgba(0, 0, 0, 0.65)";
  ctx.fillRect(8, 8, w, 26);
  ctx.fillStyle = "#ffd43b";
  ctx.fillText(text, 16, 26);
}

function maskToCanvas(mask: PgmMask, opacity: number): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = mask.width;
  canvas.height = mask.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  const image = ctx.createImageData(mask.width, mask.height);
  const alpha = Math.round(255 * Math.min(1, Math.max(0, opacity)));
  for (let i = 0; i < mask.bits.length; i++) {
    if (mask.bits[i]) {
      const o = i * 4;
      image.data[o] = SCAR_RGBA[0];
      image.data[o + 1] = SCAR_RGBA[1];
      image.data[o + 2] = SCAR_RGBA[2];
      image.data[o + 3] = alpha;
    }
  }
  ctx.putImageData(image, 0, 0);
  return canvas;
}
