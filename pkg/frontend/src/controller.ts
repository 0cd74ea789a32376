/**
 * DOM-free orchestration of the interactive loop: open a session, map clicks
 * to prompts, propagate, and keep the area chart data in sync with the
 * service. The browser layer (viewer/main) only renders what lives here.
 */

import { ApiClient, ApiError } from "./api.js";
import type { PromptPointBody, SessionStatus, SpikeEvent } from "./api.js";
import { canvasToCell } from "./coords.js";
import { parseAreaCsv } from "./csv.js";
import type { AreaEntry } from "./csv.js";
import { parsePgm } from "./pgm.js";
import type { PgmMask } from "./pgm.js";
import { initialViewState } from "./state.js";
import type { ViewState } from "./state.js";

export interface Marker extends PromptPointBody {
  frame: number;
}

export class SessionController {
  readonly state: ViewState = initialViewState();
  session: SessionStatus | null = null;
  markers: Marker[] = [];
  areaSeries: AreaEntry[] = [];
  spikes: SpikeEvent[] = [];
  lastError: string | null = null;
  /** lowest frame whose prompts are not yet propagated */
  pendingFrom: number | null = null;

  private maskCache = new Map<string, PgmMask>();

  constructor(readonly api: ApiClient) {}

  get gridWidth(): number {
    return this.session?.width ?? 0;
  }

  get gridHeight(): number {
    return this.session?.height ?? 0;
  }

  async openSession(manifestPath: string, params: Record<string, unknown> = {}): Promise<void> {
    const id = await this.api.createSession(manifestPath, params);
    this.state.sessionId = id;
    this.state.currentFrame = 0;
    this.markers = [];
    this.areaSeries = [];
    this.spikes = [];
    this.pendingFrom = null;
    this.lastError = null;
    await this.refreshStatus();
  }

  async refreshStatus(): Promise<SessionStatus> {
    const id = this.requireSession();
    this.session = await this.api.getSession(id);
    return this.session;
  }

  requireSession(): string {
    if (!this.state.sessionId) throw new Error("no session open");
    return this.state.sessionId;
  }

  setFrame(frame: number): void {
    const n = this.session?.n_frames ?? 1;
    this.state.currentFrame = Math.max(0, Math.min(n - 1, frame));
  }

  /**
   * Map a canvas click to a cell prompt and post it. Returns true when the
   * server accepted the point; a placement rejection lands in `lastError`
   * and leaves no marker.
   */
  async clickAt(
    x: number,
    y: number,
    canvasWidth: number,
    canvasHeight: number,
  ): Promise<boolean> {
    const id = this.requireSession();
    const cell = canvasToCell(x, y, canvasWidth, canvasHeight, this.gridWidth, this.gridHeight);
    if (!cell) return false;
    const frame = this.state.currentFrame;
    const point: PromptPointBody = {
      row: cell.row,
      col: cell.col,
      polarity: this.state.pendingPolarity,
    };
    try {
      await this.api.postPrompts(id, frame, [point]);
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
        return false;
      }
      throw err;
    }
    this.lastError = null;
    this.markers.push({ frame, ...point });
    this.pendingFrom = this.pendingFrom === null ? frame : Math.min(this.pendingFrom, frame);
    await this.refreshStatus();
    return true;
  }

  /** Re-propagate from the earliest pending prompt (or extend past the cursor). */
  async propagate(): Promise<void> {
    const id = this.requireSession();
    const cursor = this.session?.cursor ?? -1;
    const fromFrame = this.pendingFrom !== null ? Math.min(this.pendingFrom, cursor + 1) : cursor + 1;
    try {
      await this.api.propagate(id, fromFrame);
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
        return;
      }
      throw err;
    }
    this.lastError = null;
    this.pendingFrom = null;
    await this.refreshStatus();
    await this.refreshArea();
  }

  /** Pull area.csv and the spike list; chart data is exactly these values. */
  async refreshArea(): Promise<void> {
    const id = this.requireSession();
    this.areaSeries = parseAreaCsv(await this.api.fetchAreaCsv(id));
    const n = this.areaSeries.length;
    this.spikes = n > 5 ? await this.api.fetchSpikes(id) : [];
  }

  /** Mask for a frame, cached per revision; null when not yet propagated. */
  async loadMask(frame: number): Promise<PgmMask | null> {
    const id = this.requireSession();
    const response = await this.api.fetchMask(id, frame);
    if (response === null) return null;
    const key = `${frame}@${response.etag ?? "?"}`;
    const cached = this.maskCache.get(key);
    if (cached) return cached;
    const mask = parsePgm(response.bytes);
    this.maskCache.set(key, mask);
    if (response.etag) {
      this.state.cachedRevisions.set(`mask/${frame}`, response.etag);
    }
    return mask;
  }

  markersAt(frame: number): Marker[] {
    return this.markers.filter((m) => m.frame === frame);
  }
}
