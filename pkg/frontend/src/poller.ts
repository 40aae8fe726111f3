import { ApiClient } from "./api";
import { ForecastReport, Job } from "./schema";

export type Sleep = (ms: number) => Promise<void>;

const defaultSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export interface PollOptions {
  /** Base polling interval; LLM-bound jobs take tens of seconds. */
  intervalMs?: number;
  /** Multiplier applied after each poll, capped at maxIntervalMs. */
  backoffFactor?: number;
  maxIntervalMs?: number;
  maxPolls?: number;
  sleep?: Sleep;
  onProgress?: (job: Job) => void;
}

export class JobFailedError extends Error {
  constructor(public readonly job: Job) {
    super(job.error ?? "job failed");
  }
}

export class PollTimeoutError extends Error {
  constructor(public readonly polls: number) {
    super(`job still running after ${polls} polls`);
  }
}

/** Poll a job until terminal, then fetch the finished report. */
export async function pollForecast(
  client: ApiClient,
  jobId: string,
  options: PollOptions = {},
): Promise<ForecastReport> {
  const {
    intervalMs = 1000,
    backoffFactor = 1.5,
    maxIntervalMs = 10000,
    maxPolls = 120,
    sleep = defaultSleep,
    onProgress,
  } = options;
  let wait = intervalMs;
  for (let polls = 0; polls < maxPolls; polls += 1) {
    const job = await client.getJob(jobId);
    onProgress?.(job);
    if (job.status === "done") {
      return client.getForecast(jobId);
    }
    if (job.status === "failed") {
      throw new JobFailedError(job);
    }
    await sleep(wait);
    wait = Math.min(wait * backoffFactor, maxIntervalMs);
  }
  throw new PollTimeoutError(maxPolls);
}
