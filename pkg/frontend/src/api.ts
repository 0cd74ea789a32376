/**
 * Typed client for the scartrack session service. Every number the UI shows
 * comes through here; nothing is computed client-side beyond parsing.
 *
 * `fetchFn` is injectable so tests can record the exact call sequence.
 */

export type Polarity = "positive" | "negative";

export interface PromptPointBody {
  row: number;
  col: number;
  polarity: Polarity;
}

export interface SessionStatus {
  session_id: string;
  status: "idle" | "propagating" | "error";
  revision: number;
  cursor: number;
  n_frames: number;
  width: number;
  height: number;
  cell_size_m: number;
  dates: string[];
  backend: string;
  auto_propagate: boolean;
  warnings: Record<string, string[]>;
  error: string | null;
  halted_at: number | null;
  has_truth: boolean;
}

export interface MutationResult {
  revision: number;
  cursor: number;
}

export interface SpikeEvent {
  frame_index: number;
  date: string;
  area_m2: number;
  baseline_m2: number;
  ratio: number | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the HTTP status and the server's `detail` payload. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(ApiError.render(status, detail));
  }

  static render(status: number, detail: unknown): string {
    if (detail && typeof detail === "object" && "message" in detail) {
      return String((detail as { message: unknown }).message);
    }
    if (typeof detail === "string") return detail;
    return `HTTP ${status}`;
  }
}

async function errorOf(response: Response): Promise<ApiError> {
  let detail: unknown = null;
  try {
    const body = (await response.json()) as { detail?: unknown };
    detail = body.detail ?? body;
  } catch {
    detail = response.statusText;
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`;
  }

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.url(path), init);
    if (!response.ok) throw await errorOf(response);
    return (await response.json()) as T;
  }

  async createSession(
    manifestPath: string,
    params: Record<string, unknown> = {},
  ): Promise<string> {
    const body = await this.requestJson<{ session_id: string }>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ manifest_path: manifestPath, params }),
    });
    return body.session_id;
  }

  getSession(id: string): Promise<SessionStatus> {
    return this.requestJson<SessionStatus>(`/sessions/${id}`);
  }

  postPrompts(
    id: string,
    frame: number,
    points: PromptPointBody[],
  ): Promise<MutationResult> {
    return this.requestJson<MutationResult>(`/sessions/${id}/prompts`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ frame, points }),
    });
  }

  propagate(id: string, fromFrame: number): Promise<MutationResult> {
    return this.requestJson<MutationResult>(`/sessions/${id}/propagate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ from_frame: fromFrame }),
    });
  }

  /** Raw PGM bytes plus the revision ETag, or null when not yet propagated. */
  async fetchMask(
    id: string,
    frame: number,
  ): Promise<{ bytes: Uint8Array; etag: string | null } | null> {
    const response = await this.fetchFn(this.url(`/sessions/${id}/frames/${frame}/mask.pgm`));
    if (response.status === 404) return null;
    if (!response.ok) throw await errorOf(response);
    const buffer = await response.arrayBuffer();
    return { bytes: new Uint8Array(buffer), etag: response.headers.get("etag") };
  }

  displayUrl(id: string, frame: number): string {
    return this.url(`/sessions/${id}/frames/${frame}/display.png`);
  }

  async fetchAreaCsv(id: string): Promise<string> {
    const response = await this.fetchFn(this.url(`/sessions/${id}/area.csv`));
    if (!response.ok) throw await errorOf(response);
    return response.text();
  }

  fetchSpikes(id: string, factor = 2.0, window = 5): Promise<SpikeEvent[]> {
    return this.requestJson<SpikeEvent[]>(
      `/sessions/${id}/spikes.json?factor=${factor}&window=${window}`,
    );
  }
}
