import type {
  Bootstrap,
  HistoryResponse,
  InputResponse,
  OverrideResponse,
  SessionInputBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

// Raised when a submission cannot start: either this client already has
// one in flight (local) or the server answered 409 (server).
export class BusyError extends ApiError {
  constructor(readonly source: "local" | "server") {
    super(
      409,
      source === "local"
        ? "a submission is already in flight"
        : "an inference is already in flight",
    );
    this.name = "BusyError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private submitting = false;

  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  // The input lane is single-file: the server rejects overlapping
  // inferences with 409, so the client refuses to even send a second one.
  get busy(): boolean {
    return this.submitting;
  }

  async bootstrap(): Promise<Bootstrap> {
    return this.getJson<Bootstrap>("/bootstrap");
  }

  async history(): Promise<HistoryResponse> {
    return this.getJson<HistoryResponse>("/session/history");
  }

  async metrics(): Promise<Record<string, unknown>> {
    return this.getJson<Record<string, unknown>>("/metrics");
  }

  async submitInput(body: SessionInputBody): Promise<InputResponse> {
    if (this.submitting) throw new BusyError("local");
    this.submitting = true;
    try {
      const res = await this.fetchFn(this.base + "/session/input", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
      if (res.status === 409) throw new BusyError("server");
      if (!res.ok) throw new ApiError(res.status, await res.text());
      return (await res.json()) as InputResponse;
    } finally {
      this.submitting = false;
    }
  }

  async override(primitiveId: string): Promise<OverrideResponse> {
    const res = await this.fetchFn(this.base + "/session/override", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ primitive_id: primitiveId }),
    });
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return (await res.json()) as OverrideResponse;
  }

  streamUrl(limit?: number): string {
    return this.base + "/stream" + (limit ? `?limit=${limit}` : "");
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return (await res.json()) as T;
  }
}
