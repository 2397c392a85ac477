/** Thin /v1 API client. Mutating requests are queued so at most one is in
 * flight at a time; every call is appended to `requestLog` so tests can
 * assert the one-interaction-one-call invariant. */

import type {
  ApiErrorBody,
  ModelDetail,
  ModelRequestReply,
  ReportReply,
  SessionView,
  SpecJson,
} from "./types";

export type Fetcher = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(body.detail ?? body.error ?? `HTTP ${status}`);
  }
}

export interface LoggedRequest {
  method: string;
  url: string;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class ApiClient {
  readonly requestLog: LoggedRequest[] = [];
  private mutationChain: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly baseUrl: string,
    private readonly fetcher: Fetcher = (...a) => fetch(...a),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const url = `${this.baseUrl}${path}`;
    this.requestLog.push({ method, url });
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetcher(url, init);
    const text = await response.text();
    const parsed = text && text.startsWith("{") ? JSON.parse(text) : text;
    if (!response.ok) {
      const errBody: ApiErrorBody =
        typeof parsed === "object" ? parsed : { error: `HTTP ${response.status}`, detail: text };
      throw new ApiError(response.status, errBody);
    }
    return parsed as T;
  }

  /** Serialize mutating requests: clicks are queued, not raced. */
  private mutate<T>(work: () => Promise<T>): Promise<T> {
    const next = this.mutationChain.then(work, work);
    this.mutationChain = next.catch(() => undefined);
    return next;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/v1/healthz");
  }

  createSession(userId: string, datasetRef = "default"): Promise<{ session_id: string }> {
    return this.mutate(() =>
      this.request("POST", "/v1/sessions", { user_id: userId, dataset_ref: datasetRef }));
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  daTool(sessionId: string, tool: number | string, payload: Record<string, unknown> = {}):
      Promise<Record<string, unknown>> {
    return this.mutate(() =>
      this.request("POST", `/v1/sessions/${sessionId}/da/${tool}`, payload));
  }

  requestModel(sessionId: string, spec: SpecJson, idempotencyKey?: string):
      Promise<ModelRequestReply> {
    const body: Record<string, unknown> = { ...spec };
    if (idempotencyKey !== undefined) body["idempotency_key"] = idempotencyKey;
    return this.mutate(() =>
      this.request("POST", `/v1/sessions/${sessionId}/models`, body));
  }

  getModel(sessionId: string, modelId: number): Promise<ModelDetail> {
    return this.request("GET", `/v1/sessions/${sessionId}/models/${modelId}`);
  }

  /** Follow the pending contract: poll the model until it leaves "pending". */
  async awaitModel(sessionId: string, modelId: number,
                   intervalMs = 250, timeoutMs = 120_000): Promise<ModelDetail> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const detail = await this.getModel(sessionId, modelId);
      if (detail.status !== "pending") return detail;
      if (Date.now() > deadline) throw new Error(`model ${modelId} still pending`);
      await sleep(intervalMs);
    }
  }

  oiTool(sessionId: string, tool: number | string, payload: Record<string, unknown> = {}):
      Promise<Record<string, unknown>> {
    return this.mutate(() =>
      this.request("POST", `/v1/sessions/${sessionId}/oi/${tool}`, payload));
  }

  submitReport(sessionId: string, modelIds: number[], text: string): Promise<ReportReply> {
    return this.mutate(() =>
      this.request("POST", `/v1/sessions/${sessionId}/report`,
                   { model_ids: modelIds, text }));
  }

  telemetryRows(): Promise<{ rows: Record<string, unknown>[] }> {
    return this.request("GET", "/v1/telemetry?format=json");
  }

  telemetryModels(): Promise<{ rows: Record<string, unknown>[] }> {
    return this.request("GET", "/v1/telemetry/models");
  }
}
