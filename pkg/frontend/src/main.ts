import { ApiClient, ApiError, SchemaError } from "./api";
import { DraftStore } from "./drafts";
import { pollForecast } from "./poller";
import { renderReport } from "./views";

/** Minimal DOM glue: the testable logic lives in the other modules. */

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function wireConsole(baseUrl: string): void {
  const client = new ApiClient(baseUrl);
  const drafts = new DraftStore(window.localStorage);
  const status = el<HTMLElement>("status");
  const output = el<HTMLElement>("output");
  const form = el<HTMLFormElement>("draft-form");

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const text = el<HTMLTextAreaElement>("draft-text").value;
    const mTotal = Number(el<HTMLInputElement>("draft-m").value || "30");
    let draftId: string;
    try {
      draftId = drafts.create(text, mTotal).id;
    } catch (error) {
      status.textContent = String(error);
      return;
    }
    status.textContent = "submitting...";
    try {
      const accepted = await client.startForecast({ post_text: text, m_total: mTotal });
      drafts.linkForecast(draftId, accepted.job_id);
      const report = await pollForecast(client, accepted.job_id, {
        onProgress: (job) => {
          status.textContent = `job ${job.job_id}: ${job.status}`;
        },
      });
      const view = renderReport(report);
      if (view.empty) {
        output.innerHTML = `<p class="empty">${escapeHtml(view.emptyNotice ?? "")}</p>`;
        return;
      }
      output.innerHTML = view.panels
        .map(
          (panel) => `
<section class="community">
  <h2>${escapeHtml(panel.id)} (${panel.kind}, ${panel.size} members, side: ${escapeHtml(panel.sideLabel)})</h2>
  <h3>Representative history</h3>
  <ul>${panel.representatives.map((r) => `<li>${escapeHtml(r)}</li>`).join("")}</ul>
  <h3>Predicted responses (${panel.quota})</h3>
  <ol>${panel.predictedResponses.map((r) => `<li>${escapeHtml(r.text)}</li>`).join("")}</ol>
</section>`,
        )
        .join("\n");
      status.textContent = `done (${view.panels.length} communities)`;
    } catch (error) {
      if (error instanceof ApiError) {
        status.textContent = `server error: ${error.serverMessage}`;
      } else if (error instanceof SchemaError) {
        status.textContent = `malformed server payload: ${error.message}`;
      } else {
        status.textContent = String(error);
      }
    }
  });
}
