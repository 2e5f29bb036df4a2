/** Thin HTTP client for the suggestion service. */

import {
  parsePredictResponse,
  parseServiceConfig,
  type PredictRequest,
  type PredictResponse,
  type ServiceConfig,
} from "./types.js";

/**
 * A failed call.  `status` is the HTTP status, or 0 when the request never
 * reached the service (connection refused, DNS, aborted).  The message is
 * the service's own error text whenever one was returned.
 */
export class ServiceError extends Error {
  readonly status: number;
  readonly requestId?: string;

  constructor(status: number, message: string, requestId?: string) {
    super(message);
    this.name = "ServiceError";
    this.status = status;
    this.requestId = requestId;
  }

  get isNetworkFailure(): boolean {
    return this.status === 0;
  }
}

async function errorFromResponse(response: Response): Promise<ServiceError> {
  let message = `service returned HTTP ${response.status}`;
  let requestId: string | undefined;
  try {
    const doc: unknown = await response.json();
    if (typeof doc === "object" && doc !== null && "error" in doc) {
      const err = (doc as { error: unknown }).error;
      if (typeof err === "object" && err !== null) {
        const rec = err as Record<string, unknown>;
        if (typeof rec.message === "string") message = rec.message;
        if (typeof rec.request_id === "string") requestId = rec.request_id;
      }
    }
  } catch {
    // Non-JSON error body; keep the generic message.
  }
  return new ServiceError(response.status, message, requestId);
}

export class ServiceClient {
  readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = globalThis.fetch.bind(globalThis)) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (exc) {
      const reason = exc instanceof Error ? exc.message : String(exc);
      throw new ServiceError(0, `could not reach the suggestion service: ${reason}`);
    }
    if (!response.ok) throw await errorFromResponse(response);
    return response;
  }

  async health(): Promise<void> {
    await this.request("/v1/health");
  }

  async config(): Promise<ServiceConfig> {
    const response = await this.request("/v1/config");
    return parseServiceConfig(await response.json());
  }

  async predict(request: PredictRequest): Promise<PredictResponse> {
    const response = await this.request("/v1/predict", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    return parsePredictResponse(await response.json());
  }
}
