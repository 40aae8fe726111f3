import { Community, ForecastReport, PredictedResponse } from "./schema";

/** Read-only view models derived from a validated report. The report data
 *  is never mutated; every view is a fresh frozen structure. */

export interface CommunityPanel {
  id: string;
  kind: Community["kind"];
  size: number;
  sideLabel: string;
  quota: number;
  representatives: string[];
  predictedResponses: PredictedResponse[];
}

export interface ReportView {
  status: string;
  empty: boolean;
  emptyNotice: string | null;
  degradedFlags: string[];
  panels: CommunityPanel[];
  provenanceCounts: { similar: number; news: number; kg: number };
}

export function renderReport(report: ForecastReport): ReportView {
  if (report.status !== "ok" || report.communities.length === 0) {
    return Object.freeze({
      status: report.status,
      empty: true,
      emptyNotice:
        "No similar historical posts were found, so no communities could be forecast.",
      degradedFlags: [...report.degraded_flags],
      panels: [],
      provenanceCounts: provenance(report),
    });
  }
  const quotaOf = new Map(report.quota.map((q) => [q.community_id, q.m_k]));
  const grouped = new Map<string, PredictedResponse[]>();
  for (const response of report.responses) {
    const bucket = grouped.get(response.community_id) ?? [];
    bucket.push(response);
    grouped.set(response.community_id, bucket);
  }
  const panels = report.communities.map((community) =>
    Object.freeze({
      id: community.id,
      kind: community.kind,
      size: community.size,
      sideLabel: community.side_label ?? "mixed",
      quota: quotaOf.get(community.id) ?? 0,
      representatives: [...community.representatives],
      predictedResponses: [...(grouped.get(community.id) ?? [])].sort(
        (a, b) => a.ordinal - b.ordinal,
      ),
    }),
  );
  return Object.freeze({
    status: report.status,
    empty: false,
    emptyNotice: null,
    degradedFlags: [...report.degraded_flags],
    panels,
    provenanceCounts: provenance(report),
  });
}

function provenance(report: ForecastReport) {
  return Object.freeze({
    similar: report.provenance.similar_post_ids.length,
    news: report.provenance.news_snippet_ids.length,
    kg: report.provenance.kg_chunk_ids.length,
  });
}
