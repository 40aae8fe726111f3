import { z } from "zod";
import {
  EvalReport,
  EvalReportSchema,
  ForecastReport,
  ForecastReportSchema,
  Health,
  HealthSchema,
  Job,
  JobAccepted,
  JobAcceptedSchema,
  JobSchema,
} from "./schema";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Raised when the server answers with a non-2xx status. The server's own
 *  message is preserved verbatim so the UI can surface it unchanged. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly serverMessage: string,
  ) {
    super(`HTTP ${status}: ${serverMessage}`);
  }
}

/** Raised when a 2xx payload does not match the published schema. */
export class SchemaError extends Error {
  constructor(
    public readonly endpoint: string,
    public readonly issues: string,
  ) {
    super(`schema validation failed for ${endpoint}: ${issues}`);
  }
}

export interface ForecastInput {
  post_text: string;
  m_total?: number;
  topic_hint?: string | null;
  as_of?: number | null;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(
    endpoint: string,
    schema: z.ZodType<T>,
    init?: RequestInit,
  ): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + endpoint, init);
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, text);
    }
    let payload: unknown;
    try {
      payload = JSON.parse(text);
    } catch {
      throw new SchemaError(endpoint, "response is not JSON");
    }
    const parsed = schema.safeParse(payload);
    if (!parsed.success) {
      throw new SchemaError(endpoint, parsed.error.message);
    }
    return parsed.data;
  }

  health(): Promise<Health> {
    return this.request("/health", HealthSchema);
  }

  startForecast(input: ForecastInput): Promise<JobAccepted> {
    return this.request("/forecast", JobAcceptedSchema, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(input),
    });
  }

  getJob(jobId: string): Promise<Job> {
    return this.request(`/jobs/${jobId}`, JobSchema);
  }

  getForecast(jobId: string): Promise<ForecastReport> {
    return this.request(`/forecasts/${jobId}`, ForecastReportSchema);
  }

  evaluate(predicted: string[], real: string[]): Promise<EvalReport> {
    return this.request("/evaluate", EvalReportSchema, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ predicted, real }),
    });
  }
}
