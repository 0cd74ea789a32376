import type { Polarity } from "./api.js";

/** What the viewer currently shows; mutated only by the controller. */
export interface ViewState {
  sessionId: string | null;
  currentFrame: number;
  overlayOpacity: number;
  pendingPolarity: Polarity;
  /** ETag (revision) of each cached resource, keyed by resource path. */
  cachedRevisions: Map<string, string>;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    currentFrame: 0,
    overlayOpacity: 0.45,
    pendingPolarity: "positive",
    cachedRevisions: new Map(),
  };
}
