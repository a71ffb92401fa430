/** HTTP client for the generation service.
 *
 * Endpoints:
 *   POST /api/generate           -> 202 {job_id}
 *   GET  /api/generate/{job_id}  -> {id, state, steps, seed, error, result}
 *   GET  /api/health             -> {model_loaded, checkpoint_hash}
 *
 * Non-2xx responses carry {detail}; they surface as ApiError so the UI can
 * show 400s inline. fetch and the poll delay are injectable for tests.
 */

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobResult {
  heightmap_png_base64: string;
  texture_png_base64: string;
}

export interface JobStatus {
  id: string;
  state: JobState;
  steps: number;
  seed: number;
  error: string | null;
  result: JobResult | null;
}

export interface HealthStatus {
  model_loaded: boolean;
  checkpoint_hash: string | null;
}

export interface GenerateRequest {
  sketch_png_base64?: string;
  steps?: number;
  seed?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(status === 0 ? detail : `service returned ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientHooks {
  fetchFn?: FetchFn;
  sleep?: (ms: number) => Promise<void>;
}

const realSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ServiceClient {
  private readonly fetchFn: FetchFn;
  private readonly sleep: (ms: number) => Promise<void>;
  private inFlight = false;

  constructor(
    readonly baseUrl: string,
    readonly pollIntervalMs = 500,
    hooks: ClientHooks = {},
  ) {
    this.fetchFn = hooks.fetchFn ?? ((url, init) => fetch(url, init));
    this.sleep = hooks.sleep ?? realSleep;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  async health(): Promise<HealthStatus> {
    return this.request<HealthStatus>("GET", "/api/health");
  }

  async submit(req: GenerateRequest): Promise<string> {
    const body = await this.request<{ job_id: string }>("POST", "/api/generate", req);
    return body.job_id;
  }

  async job(id: string): Promise<JobStatus> {
    return this.request<JobStatus>("GET", `/api/generate/${encodeURIComponent(id)}`);
  }

  /** Submit and poll until the job settles. Only one call may be in flight;
   * a failed job resolves (state "failed" with the server's error), while
   * transport and HTTP errors reject with ApiError. */
  async generate(req: GenerateRequest, onUpdate?: (status: JobStatus) => void): Promise<JobStatus> {
    if (this.inFlight) {
      throw new Error("a generation request is already in flight");
    }
    this.inFlight = true;
    try {
      const id = await this.submit(req);
      for (;;) {
        const status = await this.job(id);
        onUpdate?.(status);
        if (status.state === "done" || status.state === "failed") {
          return status;
        }
        await this.sleep(this.pollIntervalMs);
      }
    } finally {
      this.inFlight = false;
    }
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (exc) {
      throw new ApiError(0, `cannot reach ${this.baseUrl}: ${String(exc)}`);
    }
    const payload: unknown = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        payload !== null &&
        typeof payload === "object" &&
        typeof (payload as { detail?: unknown }).detail === "string"
          ? (payload as { detail: string }).detail
          : `${response.status} ${response.statusText}`;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }
}
