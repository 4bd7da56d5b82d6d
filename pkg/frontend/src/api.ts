import type {
  PatternDocument,
  PatternEntry,
  PlaybackSummary,
  SessionInfo,
} from "./types.js";

/** Error body the service returns for every non-2xx response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly token: string,
    readonly detail: string,
  ) {
    super(`${token}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface PlaybackRequest {
  id: string;
  gain?: number;
  speed?: number;
  sink?: string;
  loop?: boolean;
  realtime?: boolean;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  // fetch must stay attached to its global, hence the wrapper default
  constructor(
    readonly baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) {
      let token = `HTTP ${res.status}`;
      let detail = res.statusText;
      try {
        const payload = (await res.json()) as { error?: unknown; detail?: unknown };
        if (typeof payload.error === "string") token = payload.error;
        if (typeof payload.detail === "string") detail = payload.detail;
        else if (payload.detail !== undefined) detail = JSON.stringify(payload.detail);
      } catch {
        // non-JSON body: keep the status text
      }
      throw new ApiError(res.status, token, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string; version: string; uptime_s: number; patterns: number }> {
    return this.request("GET", "/health");
  }

  getSession(): Promise<SessionInfo> {
    return this.request("GET", "/session");
  }

  setSource(kind: string, params: Record<string, unknown>): Promise<SessionInfo> {
    return this.request("POST", "/session/source", { kind, params });
  }

  sync(): Promise<SessionInfo> {
    return this.request("POST", "/session/sync");
  }

  recordStart(): Promise<SessionInfo> {
    return this.request("POST", "/session/record/start");
  }

  recordStop(
    name: string,
    annotations: Record<string, string> = {},
  ): Promise<SessionInfo & { id: string; frame_count: number }> {
    return this.request("POST", "/session/record/stop", { name, annotations });
  }

  patterns(): Promise<{ patterns: PatternEntry[] }> {
    return this.request("GET", "/patterns");
  }

  pattern(id: string): Promise<PatternDocument> {
    return this.request("GET", `/patterns/${encodeURIComponent(id)}`);
  }

  deletePattern(id: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/patterns/${encodeURIComponent(id)}`);
  }

  playbackStart(req: PlaybackRequest): Promise<PlaybackSummary> {
    return this.request("POST", "/playback/start", req);
  }

  playbackStop(): Promise<PlaybackSummary> {
    return this.request("POST", "/playback/stop");
  }
}
