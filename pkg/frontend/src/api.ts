// Typed client for the dirfilt service. All calls go through fetch with JSON
// bodies; service-side failures carry a {detail} message that is surfaced
// verbatim so the user sees exactly what the service rejected.

import {
  HealthResponse,
  MetricsResponse,
  RecipesResponse,
  RenderResponse,
  ResolveResponse,
  SceneDoc,
  SessionInfo,
  TimelineAck,
  TimelineEntryWire,
} from "./types.js";

export class ServiceError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ServiceError";
    this.status = status;
  }
}

// Monotonic token gate for async UI state: every request takes a token, and
// only the response holding the newest token may update the view. Responses
// that arrive after a newer request started are stale and must be dropped.
export class SequenceGate {
  private next = 0;
  private current = -1;

  begin(): number {
    this.current = this.next++;
    return this.current;
  }

  isCurrent(token: number): boolean {
    return token === this.current;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceError(0, `service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      let detail = `${resp.status} ${resp.statusText}`;
      try {
        const doc = await resp.json();
        if (doc && typeof doc.detail === "string") detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ServiceError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("GET", "/health");
  }

  recipes(): Promise<RecipesResponse> {
    return this.request("GET", "/patterns/recipes");
  }

  resolvePattern(
    components: Record<string, number | string>[],
    floorDb: number,
    l?: number,
  ): Promise<ResolveResponse> {
    return this.request("POST", "/patterns/resolve", {
      components,
      floor_db: floorDb,
      ...(l === undefined ? {} : { l }),
    });
  }

  createSession(scene: SceneDoc, stft?: Record<string, number>): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { scene, ...(stft ? { stft } : {}) });
  }

  setTimeline(sessionId: string, entries: TimelineEntryWire[]): Promise<TimelineAck> {
    return this.request("POST", `/sessions/${sessionId}/timeline`, { entries });
  }

  render(sessionId: string, method: string): Promise<RenderResponse> {
    return this.request("POST", `/sessions/${sessionId}/render`, {
      method,
      wav_format: "pcm16",
    });
  }

  metrics(sessionId: string): Promise<MetricsResponse> {
    return this.request("GET", `/sessions/${sessionId}/metrics`);
  }
}
