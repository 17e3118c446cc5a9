import type {
  HealthResponse,
  RecommendRequestBody,
  RecommendResponse,
  StatementsPage,
  WheelPayload,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  getWheel(): Promise<WheelPayload> {
    return this.fetchFn(`${this.baseUrl}/wheel`).then((r) => asJson<WheelPayload>(r));
  }

  getStatements(category?: string, intensity?: string, limit = 200): Promise<StatementsPage> {
    const params = new URLSearchParams();
    if (category) params.set("category", category);
    if (intensity) params.set("intensity", intensity);
    params.set("limit", String(limit));
    return this.fetchFn(`${this.baseUrl}/statements?${params.toString()}`).then((r) =>
      asJson<StatementsPage>(r),
    );
  }

  getHealth(): Promise<HealthResponse> {
    return this.fetchFn(`${this.baseUrl}/health`).then((r) => asJson<HealthResponse>(r));
  }

  recommend(body: RecommendRequestBody, signal?: AbortSignal): Promise<RecommendResponse> {
    return this.fetchFn(`${this.baseUrl}/recommend`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    }).then((r) => asJson<RecommendResponse>(r));
  }
}

/** At most one recommend request in flight: a new submit aborts the
 * previous one, whose promise rejects with an AbortError. */
export class RecommendGate {
  private controller: AbortController | null = null;

  constructor(private readonly api: ApiClient) {}

  submit(body: RecommendRequestBody): Promise<RecommendResponse> {
    this.controller?.abort();
    this.controller = new AbortController();
    return this.api.recommend(body, this.controller.signal);
  }
}
