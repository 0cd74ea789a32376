/**
 * Layout math for the area chart. The x axis is proportional to acquisition
 * date, not frame index, so irregular revisit cadence reads honestly.
 */

import type { SpikeEvent } from "./api.js";
import type { AreaEntry } from "./csv.js";

export interface ChartPoint {
  x: number;
  y: number;
  frameIndex: number;
  areaM2: number;
  date: string;
  spike: boolean;
}

export interface ChartLayout {
  points: ChartPoint[];
  yMax: number;
}

function dayNumber(iso: string): number {
  return Date.parse(`${iso}T00:00:00Z`) / 86400000;
}

export function chartLayout(
  entries: AreaEntry[],
  spikes: SpikeEvent[],
  width: number,
  height: number,
  pad = 28,
): ChartLayout {
  if (entries.length === 0) return { points: [], yMax: 0 };
  const spikeFrames = new Set(spikes.map((s) => s.frame_index));
  const days = entries.map((e) => dayNumber(e.date));
  const dayMin = Math.min(...days);
  const daySpan = Math.max(1, Math.max(...days) - dayMin);
  const yMax = Math.max(1, ...entries.map((e) => e.areaM2));
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const points = entries.map((e, i) => ({
    x: pad + (((days[i] as number) - dayMin) / daySpan) * innerW,
    y: pad + (1 - e.areaM2 / yMax) * innerH,
    frameIndex: e.frameIndex,
    areaM2: e.areaM2,
    date: e.date,
    spike: spikeFrames.has(e.frameIndex),
  }));
  return { points, yMax };
}

/** Chart point closest to a click, or null when too far away to count. */
export function nearestPoint(
  layout: ChartLayout,
  x: number,
  y: number,
  maxDistance = 24,
): ChartPoint | null {
  let best: ChartPoint | null = null;
  let bestDist = maxDistance;
  for (const p of layout.points) {
    const d = Math.hypot(p.x - x, p.y - y);
    if (d <= bestDist) {
      best = p;
      bestDist = d;
    }
  }
  return best;
}
