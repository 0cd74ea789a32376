import { describe, expect, it } from "vitest";

import { chartLayout, nearestPoint } from "../src/chart.js";
import { canvasToCell, cellToCanvasCenter } from "../src/coords.js";
import { CsvError, parseAreaCsv } from "../src/csv.js";
import { PgmError, parsePgm } from "../src/pgm.js";
import { buildPgm } from "./mock_service.js";

describe("coordinate mapping", () => {
  it("round-trips every cell center exactly", () => {
    for (const [cw, ch] of [[400, 400], [768, 512], [333, 777]] as const) {
      const gw = 8;
      const gh = 6;
      for (let r = 0; r < gh; r++) {
        for (let c = 0; c < gw; c++) {
          const { x, y } = cellToCanvasCenter(r, c, cw, ch, gw, gh);
          expect(canvasToCell(x, y, cw, ch, gw, gh)).toEqual({ row: r, col: c });
        }
      }
    }
  });

  it("rejects clicks outside the canvas", () => {
    expect(canvasToCell(-1, 10, 100, 100, 8, 8)).toBeNull();
    expect(canvasToCell(10, 100, 100, 100, 8, 8)).toBeNull();
  });

  it("clamps the last pixel into the last cell", () => {
    expect(canvasToCell(99.999, 99.999, 100, 100, 8, 8)).toEqual({ row: 7, col: 7 });
  });
});

describe("pgm parsing", () => {
  it("reads dimensions, cell size comment, and bits", () => {
    const mask = parsePgm(buildPgm(5, 3, [[0, 0], [2, 4]]));
    expect(mask.width).toBe(5);
    expect(mask.height).toBe(3);
    expect(mask.cellSize).toBe(10.0);
    expect(mask.bits[0]).toBe(1);
    expect(mask.bits[2 * 5 + 4]).toBe(1);
    expect(Array.from(mask.bits).reduce((a, b) => a + b, 0)).toBe(2);
  });

  it("reads plain PGM without the comment", () => {
    const bytes = new Uint8Array([
      ...new TextEncoder().encode("P5\n2 1\n255\n"),
      255, 0,
    ]);
    const mask = parsePgm(bytes);
    expect(mask.cellSize).toBe(1.0);
    expect(Array.from(mask.bits)).toEqual([1, 0]);
  });

  it("rejects bad magic and truncated payloads", () => {
    expect(() => parsePgm(new TextEncoder().encode("P2\n1 1\n255\n0"))).toThrow(PgmError);
    const truncated = buildPgm(4, 4, []).slice(0, -1);
    expect(() => parsePgm(truncated)).toThrow(/expected 16/);
  });

  it("rejects non-binary pixel values", () => {
    const bytes = buildPgm(2, 1, []);
    bytes[bytes.length - 1] = 7;
    expect(() => parsePgm(bytes)).toThrow(/invalid mask pixel/);
  });
});

describe("area csv parsing", () => {
  it("parses the service format", () => {
    const rows = parseAreaCsv("frame_index,date,area_m2\n0,2018-01-01,120.5\n1,2018-02-01,130.0\n");
    expect(rows).toEqual([
      { frameIndex: 0, date: "2018-01-01", areaM2: 120.5 },
      { frameIndex: 1, date: "2018-02-01", areaM2: 130.0 },
    ]);
  });

  it("rejects a wrong header", () => {
    expect(() => parseAreaCsv("a,b,c\n")).toThrow(CsvError);
  });
});

describe("chart layout", () => {
  const entries = [
    { frameIndex: 0, date: "2018-01-01", areaM2: 100 },
    { frameIndex: 1, date: "2018-01-11", areaM2: 200 },
    { frameIndex: 2, date: "2018-01-31", areaM2: 400 },
  ];

  it("spaces x by date, not by index", () => {
    const layout = chartLayout(entries, [], 330, 200, 15);
    const [a, b, c] = layout.points;
    expect(a!.x).toBeCloseTo(15);
    expect(c!.x).toBeCloseTo(315);
    // 10 of 30 days elapsed -> one third of the way across
    expect(b!.x).toBeCloseTo(15 + 300 / 3);
  });

  it("marks spike frames", () => {
    const layout = chartLayout(entries, [
      { frame_index: 2, date: "2018-01-31", area_m2: 400, baseline_m2: 100, ratio: 4 },
    ], 330, 200);
    expect(layout.points.map((p) => p.spike)).toEqual([false, false, true]);
  });

  it("nearestPoint picks the closest point within reach", () => {
    const layout = chartLayout(entries, [], 330, 200, 15);
    const target = layout.points[1]!;
    expect(nearestPoint(layout, target.x + 3, target.y - 3)?.frameIndex).toBe(1);
    expect(nearestPoint(layout, 9999, 9999)).toBeNull();
  });

  it("handles an empty series", () => {
    expect(chartLayout([], [], 100, 100).points).toEqual([]);
  });
});
