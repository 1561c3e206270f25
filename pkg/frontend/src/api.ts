// Thin typed client for the annotation service. Every request goes through
// one dispatcher that records "METHOD path"; the client performs no model
// math itself, it only relays server numbers.

import type {
  DecodePayload,
  EvidenceRequest,
  ExportPayload,
  HeatmapPayload,
  ModelInfo,
  SessionPayload,
  FramePayload,
} from "./types.js";

// The complete documented endpoint set; tests assert the log stays inside it.
export const DOCUMENTED_ENDPOINTS: RegExp[] = [
  /^GET \/model\/info$/,
  /^POST \/sessions$/,
  /^GET \/sessions\/[^/]+\/frames\/\d+\/image\.png$/,
  /^GET \/sessions\/[^/]+\/frames\/\d+\/heatmap(\?.*)?$/,
  /^POST \/sessions\/[^/]+\/frames\/\d+\/evidence$/,
  /^POST \/sessions\/[^/]+\/decode$/,
  /^GET \/sessions\/[^/]+\/export$/,
];

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class AnnotationApi {
  readonly requestLog: string[] = [];

  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.requestLog.push(`${method} ${path}`);
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request("GET", "/model/info");
  }

  createSession(videoId: string): Promise<SessionPayload> {
    return this.request("POST", "/sessions", { video_id: videoId });
  }

  frameImageUrl(sessionId: string, frame: number): string {
    // consumed by <img>/drawImage; logged here so the endpoint audit sees it
    this.requestLog.push(`GET /sessions/${sessionId}/frames/${frame}/image.png`);
    return `${this.baseUrl}/sessions/${sessionId}/frames/${frame}/image.png`;
  }

  heatmap(sessionId: string, frame: number, landmark: number, res: number): Promise<HeatmapPayload> {
    return this.request(
      "GET",
      `/sessions/${sessionId}/frames/${frame}/heatmap?landmark=${landmark}&res=${res}`,
    );
  }

  postEvidence(sessionId: string, frame: number, req: EvidenceRequest): Promise<FramePayload> {
    return this.request("POST", `/sessions/${sessionId}/frames/${frame}/evidence`, req);
  }

  decode(sessionId: string): Promise<DecodePayload> {
    return this.request("POST", `/sessions/${sessionId}/decode`);
  }

  exportSession(sessionId: string): Promise<ExportPayload> {
    return this.request("GET", `/sessions/${sessionId}/export`);
  }

  undocumentedRequests(): string[] {
    return this.requestLog.filter((line) => !DOCUMENTED_ENDPOINTS.some((re) => re.test(line)));
  }
}
