import { describe, expect, it } from "vitest";

import reportFixture from "./fixtures/forecast_report.json";
import { ApiClient, ApiError, SchemaError } from "../src/api";
import { ForecastReportSchema } from "../src/schema";
import { DraftStore, MemoryStorage } from "../src/drafts";
import { JobFailedError, pollForecast } from "../src/poller";
import { renderReport } from "../src/views";
import { MockBackend } from "./mock_backend";

const instantSleep = async () => {};

describe("compose -> forecast -> render against the mock backend", () => {
  it("runs the full flow and renders grouped community panels", async () => {
    const backend = new MockBackend();
    const client = new ApiClient("http://mock", backend.fetch);
    const drafts = new DraftStore(new MemoryStorage());

    const draft = drafts.create("Ceasefire negotiations stall again.", 12);
    const accepted = await client.startForecast({
      post_text: draft.text,
      m_total: draft.mTotal,
    });
    drafts.linkForecast(draft.id, accepted.job_id);

    const seen: string[] = [];
    const report = await pollForecast(client, accepted.job_id, {
      sleep: instantSleep,
      onProgress: (job) => seen.push(job.status),
    });
    // progress is visible: the job passes through non-terminal states first
    expect(seen[0]).toBe("queued");
    expect(seen[seen.length - 1]).toBe("done");

    const view = renderReport(report);
    expect(view.empty).toBe(false);
    expect(view.panels.length).toBeGreaterThanOrEqual(2);
    // responses grouped per community and the counts match the quota
    const totalResponses = view.panels.reduce(
      (sum, panel) => sum + panel.predictedResponses.length,
      0,
    );
    expect(totalResponses).toBe(report.responses.length);
    for (const panel of view.panels) {
      expect(panel.predictedResponses.length).toBe(panel.quota);
      for (const response of panel.predictedResponses) {
        expect(response.community_id).toBe(panel.id);
      }
      const ordinals = panel.predictedResponses.map((r) => r.ordinal);
      expect(ordinals).toEqual([...ordinals].sort((a, b) => a - b));
    }
    // draft lineage recorded the forecast
    expect(drafts.get(draft.id)?.forecastIds).toEqual([accepted.job_id]);
  });

  it("renders the explicit empty state for a degraded report", () => {
    const degraded = {
      ...(reportFixture as Record<string, unknown>),
      status: "no_similar_history",
      communities: [],
      responses: [],
      quota: [],
      degraded_flags: ["empty_candidate_set"],
    };
    // parse through the same schema the client uses in production
    const view = renderReport(ForecastReportSchema.parse(degraded));
    expect(view.empty).toBe(true);
    expect(view.emptyNotice).toContain("No similar historical posts");
    expect(view.degradedFlags).toContain("empty_candidate_set");
  });

  it("surfaces server errors verbatim", async () => {
    const backend = new MockBackend();
    const client = new ApiClient("http://mock", backend.fetch);
    await expect(
      client.startForecast({ post_text: "" }),
    ).rejects.toMatchObject({ status: 422 });
    try {
      await client.startForecast({ post_text: "" });
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).serverMessage).toContain("post_text must be non-empty");
    }
  });

  it("raises a schema error on malformed server payloads", async () => {
    const backend = new MockBackend();
    backend.report = { schema_version: 1, but: "wrong shape" };
    const client = new ApiClient("http://mock", backend.fetch);
    const accepted = await client.startForecast({ post_text: "hello" });
    await expect(
      pollForecast(client, accepted.job_id, { sleep: instantSleep }),
    ).rejects.toBeInstanceOf(SchemaError);
  });

  it("propagates job failures with the server's error message", async () => {
    const backend = new MockBackend();
    backend.failJobs = true;
    const client = new ApiClient("http://mock", backend.fetch);
    const accepted = await client.startForecast({ post_text: "hello" });
    await expect(
      pollForecast(client, accepted.job_id, { sleep: instantSleep }),
    ).rejects.toBeInstanceOf(JobFailedError);
  });

  it("polling interval backs off from 1s and stays capped", async () => {
    const backend = new MockBackend();
    const client = new ApiClient("http://mock", backend.fetch);
    const accepted = await client.startForecast({ post_text: "hello" });
    const waits: number[] = [];
    await pollForecast(client, accepted.job_id, {
      sleep: async (ms) => {
        waits.push(ms);
      },
    });
    expect(waits[0]).toBe(1000);
    for (let i = 1; i < waits.length; i += 1) {
      expect(waits[i]).toBeGreaterThanOrEqual(waits[i - 1] as number);
      expect(waits[i]).toBeLessThanOrEqual(10000);
    }
  });
});
