import { ForecastReport, Job } from "./schema";
import { CommunityPanel, renderReport } from "./views";

/** Side-by-side comparison of two finished forecasts: aligned community
 *  panels with size-difference highlights plus overlaid emotion data. */

export interface PanelDiff {
  communityId: string;
  left: CommunityPanel | null;
  right: CommunityPanel | null;
  sizeDelta: number | null;
  changed: boolean;
}

export interface ComparisonView {
  disabled: false;
  diffs: PanelDiff[];
  anyChanged: boolean;
}

export interface DisabledComparison {
  disabled: true;
  reason: string;
}

export function compareDisabledReason(a: Job, b: Job): string | null {
  for (const job of [a, b]) {
    if (job.status !== "done") {
      return `forecast ${job.job_id} is ${job.status}`;
    }
  }
  return null;
}

export function compareScenarios(
  left: ForecastReport,
  right: ForecastReport,
): ComparisonView {
  const leftPanels = new Map(renderReport(left).panels.map((p) => [p.id, p]));
  const rightPanels = new Map(renderReport(right).panels.map((p) => [p.id, p]));
  const ids = [...new Set([...leftPanels.keys(), ...rightPanels.keys()])].sort();
  const diffs = ids.map((communityId) => {
    const l = leftPanels.get(communityId) ?? null;
    const r = rightPanels.get(communityId) ?? null;
    const sizeDelta = l && r ? r.size - l.size : null;
    const changed =
      l === null ||
      r === null ||
      l.size !== r.size ||
      l.quota !== r.quota ||
      l.sideLabel !== r.sideLabel;
    return { communityId, left: l, right: r, sizeDelta, changed };
  });
  return {
    disabled: false,
    diffs,
    anyChanged: diffs.some((d) => d.changed),
  };
}
