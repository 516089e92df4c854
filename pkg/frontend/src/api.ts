// Thin fetch client for the session service. The fetch function is
// injectable so tests can run against recorded fixtures.

import type { ModelDocument, ServiceErrorBody, SessionView, Value } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function readJson<T>(response: Response): Promise<T> {
  const body = (await response.json()) as T | ServiceErrorBody;
  if (!response.ok) {
    const err = body as ServiceErrorBody;
    throw new ServiceError(err.error ?? "unknown", err.message ?? "request failed",
      response.status);
  }
  return body as T;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => readJson<T>(r));
  }

  uploadModel(document: ModelDocument): Promise<{ model_id: string; loops: string[][] }> {
    return this.post("/models", document);
  }

  getModel(modelId: string): Promise<ModelDocument> {
    return this.fetchFn(`${this.baseUrl}/models/${modelId}`)
      .then((r) => readJson<ModelDocument>(r));
  }

  createSession(config: {
    model_id: string;
    rule?: string;
    mode?: string;
    strategy?: string;
  }): Promise<SessionView> {
    return this.post("/sessions", config);
  }

  submitMeasurement(
    sessionId: string,
    measurement: { component: string; time: number; value: Value },
  ): Promise<SessionView> {
    return this.post(`/sessions/${sessionId}/measurements`, measurement);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.fetchFn(`${this.baseUrl}/sessions/${sessionId}`)
      .then((r) => readJson<SessionView>(r));
  }
}
