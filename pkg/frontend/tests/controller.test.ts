/**
 * Thin-client checks: a scripted session issues exactly the documented API
 * calls, chart values are the service's area.csv values verbatim, and a
 * placement rejection surfaces the server's 422 message without side
 * effects.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { MockService, jsonResponse, textResponse } from "./mock_service.js";

const BASE = "http://svc";
const SID = "abc123";

function statusDoc(overrides: Record<string, unknown> = {}) {
  return {
    session_id: SID,
    status: "idle",
    revision: 1,
    cursor: 0,
    n_frames: 4,
    width: 8,
    height: 8,
    cell_size_m: 10.0,
    dates: ["2018-01-01", "2018-02-01", "2018-03-01", "2018-04-15"],
    backend: "native",
    auto_propagate: false,
    warnings: {},
    error: null,
    halted_at: null,
    has_truth: false,
    ...overrides,
  };
}

const AREA_CSV =
  "frame_index,date,area_m2\n" +
  "0,2018-01-01,1200.0\n" +
  "1,2018-02-01,1500.0\n" +
  "2,2018-03-01,1800.0\n" +
  "3,2018-04-15,2400.0\n";

function wire(service: MockService) {
  service.on("POST", "/api/v1/sessions", () => jsonResponse({ session_id: SID }, 201));
  service.on("GET", `/api/v1/sessions/${SID}`, () => jsonResponse(statusDoc()));
  service.on("POST", `/api/v1/sessions/${SID}/prompts`, () =>
    jsonResponse({ revision: 2, cursor: 0 }));
  service.on("POST", `/api/v1/sessions/${SID}/propagate`, () =>
    jsonResponse({ revision: 3, cursor: 3 }));
  service.on("GET", `/api/v1/sessions/${SID}/area.csv`, () => textResponse(AREA_CSV));
  return new SessionController(new ApiClient(BASE, service.fetch));
}

describe("scripted session", () => {
  it("issues exactly the documented API calls", async () => {
    const service = new MockService();
    const controller = wire(service);

    await controller.openSession("/data/manifest.json");
    // click 1: positive at cell (3, 4) on a 400x400 canvas over the 8x8 grid
    expect(await controller.clickAt(225, 175, 400, 400)).toBe(true);
    // click 2: negative at cell (1, 1)
    controller.state.pendingPolarity = "negative";
    expect(await controller.clickAt(75, 75, 400, 400)).toBe(true);
    await controller.propagate();

    expect(service.callSignatures).toEqual([
      `POST /api/v1/sessions`,
      `GET /api/v1/sessions/${SID}`,
      `POST /api/v1/sessions/${SID}/prompts`,
      `GET /api/v1/sessions/${SID}`,
      `POST /api/v1/sessions/${SID}/prompts`,
      `GET /api/v1/sessions/${SID}`,
      `POST /api/v1/sessions/${SID}/propagate`,
      `GET /api/v1/sessions/${SID}`,
      `GET /api/v1/sessions/${SID}/area.csv`,
    ]);
  });

  it("posts the exact clicked cells with the pending polarity", async () => {
    const service = new MockService();
    const controller = wire(service);
    await controller.openSession("/data/manifest.json");
    await controller.clickAt(225, 175, 400, 400);
    controller.state.pendingPolarity = "negative";
    await controller.clickAt(75, 75, 400, 400);

    const prompts = service.calls.filter((c) => c.path.endsWith("/prompts"));
    expect(prompts[0]?.body).toEqual({
      frame: 0,
      points: [{ row: 3, col: 4, polarity: "positive" }],
    });
    expect(prompts[1]?.body).toEqual({
      frame: 0,
      points: [{ row: 1, col: 1, polarity: "negative" }],
    });
    expect(controller.markersAt(0)).toHaveLength(2);
  });

  it("propagates from the earliest pending prompt frame", async () => {
    const service = new MockService();
    const controller = wire(service);
    await controller.openSession("/data/manifest.json");
    await controller.clickAt(225, 175, 400, 400);
    await controller.propagate();
    const propagate = service.calls.find((c) => c.path.endsWith("/propagate"));
    expect(propagate?.body).toEqual({ from_frame: 0 });
  });

  it("displays area values equal to /area.csv values", async () => {
    const service = new MockService();
    const controller = wire(service);
    await controller.openSession("/data/manifest.json");
    await controller.clickAt(225, 175, 400, 400);
    await controller.propagate();

    expect(controller.areaSeries).toEqual([
      { frameIndex: 0, date: "2018-01-01", areaM2: 1200.0 },
      { frameIndex: 1, date: "2018-02-01", areaM2: 1500.0 },
      { frameIndex: 2, date: "2018-03-01", areaM2: 1800.0 },
      { frameIndex: 3, date: "2018-04-15", areaM2: 2400.0 },
    ]);
  });

  it("surfaces the 422 placement message and records no marker", async () => {
    const service = new MockService();
    const controller = wire(service);
    service.on("POST", `/api/v1/sessions/${SID}/prompts`, () =>
      jsonResponse(
        {
          detail: {
            message:
              "positive prompt at frame 0 (3, 4) sits on a cell with NDVI 0.6 above threshold 0.1",
            row: 3,
            col: 4,
            frame: 0,
          },
        },
        422,
      ));

    await controller.openSession("/data/manifest.json");
    const accepted = await controller.clickAt(225, 175, 400, 400);
    expect(accepted).toBe(false);
    expect(controller.lastError).toContain("above threshold");
    expect(controller.markers).toHaveLength(0);
    // the rejected click must not trigger any follow-up request
    expect(service.callSignatures.filter((s) => s.startsWith("GET"))).toHaveLength(1);
  });
});

describe("spike pass-through", () => {
  it("fetches spikes for longer series and keeps them verbatim", async () => {
    const service = new MockService();
    const controller = wire(service);
    const longCsv =
      "frame_index,date,area_m2\n" +
      Array.from({ length: 8 }, (_, i) => `${i},2018-0${i + 1}-01,${100 + i}`).join("\n") +
      "\n";
    service.on("GET", `/api/v1/sessions/${SID}/area.csv`, () => textResponse(longCsv));
    const spikes = [
      { frame_index: 7, date: "2018-08-01", area_m2: 107, baseline_m2: 50, ratio: 2.14 },
    ];
    service.on("GET", `/api/v1/sessions/${SID}/spikes.json?factor=2&window=5`, () =>
      jsonResponse(spikes));

    await controller.openSession("/data/manifest.json");
    await controller.refreshArea();
    expect(controller.spikes).toEqual(spikes);
    expect(service.callSignatures).toContain(
      `GET /api/v1/sessions/${SID}/spikes.json?factor=2&window=5`,
    );
  });
});

describe("mask loading", () => {
  it("returns null for not-yet-propagated frames", async () => {
    const service = new MockService();
    const controller = wire(service);
    service.on("GET", `/api/v1/sessions/${SID}/frames/2/mask.pgm`, () =>
      jsonResponse({ detail: "no mask yet for frame 2" }, 404));
    await controller.openSession("/data/manifest.json");
    expect(await controller.loadMask(2)).toBeNull();
  });

  it("parses served masks and caches by revision", async () => {
    const { buildPgm, bytesResponse } = await import("./mock_service.js");
    const service = new MockService();
    const controller = wire(service);
    let served = 0;
    service.on("GET", `/api/v1/sessions/${SID}/frames/0/mask.pgm`, () => {
      served += 1;
      return bytesResponse(buildPgm(8, 8, [[3, 4], [3, 5]]), '"7"');
    });
    await controller.openSession("/data/manifest.json");
    const mask = await controller.loadMask(0);
    expect(mask?.width).toBe(8);
    expect(mask?.bits[3 * 8 + 4]).toBe(1);
    expect(mask?.bits[0]).toBe(0);
    await controller.loadMask(0);
    expect(served).toBe(2); // conditional reuse is by parsed-mask cache
    expect(controller.state.cachedRevisions.get("mask/0")).toBe('"7"');
  });
});
