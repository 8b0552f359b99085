// Pure HTML renderers; all service-provided text is escaped.

import { LABELS } from "./types.js";
import type { Agreement, Progress, QueueItem, StatusCounts } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** The masked sample card: full dialogue context, target highlighted,
 * and the five label buttons in fixed order. */
export function renderQueueItem(item: QueueItem, remaining: number): string {
  const context = item.context
    .map((line) => {
      const cls = line.target ? "turn target" : "turn";
      return `<li class="${cls}"><span class="speaker">${escapeHtml(line.speaker)}</span>: ${escapeHtml(line.text)}</li>`;
    })
    .join("\n");
  const buttons = LABELS.map(
    (label) => `<button class="label-btn" data-label="${label}">${label}</button>`,
  ).join("\n");
  return `
<section class="sample" data-sample-id="${escapeHtml(item.sample_id)}">
  <header>
    <span class="dialogue">${escapeHtml(item.dialogue_id)}</span>
    <span class="domain">${escapeHtml(item.domain ?? "")}</span>
    <span class="remaining">${remaining} left</span>
  </header>
  <ol class="context">
${context}
  </ol>
  <p class="ask">Which emotion does the highlighted utterance carry?</p>
  <div class="labels">
${buttons}
  </div>
</section>`;
}

export function renderEmptyQueue(annotator: string): string {
  return `
<section class="done">
  <h2>All caught up</h2>
  <p>${escapeHtml(annotator)}, you have judged every pending sample.</p>
</section>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner error">Service unreachable, queue preserved. Retrying&hellip; (${escapeHtml(message)})</div>`;
}

function countsRow(name: string, counts: StatusCounts): string {
  return `<tr><td>${escapeHtml(name)}</td><td>${counts.pending}</td><td>${counts.accepted}</td><td>${counts.rejected}</td></tr>`;
}

export function renderProgress(progress: Progress): string {
  const emotions = Object.entries(progress.per_emotion)
    .map(([emotion, counts]) => countsRow(emotion, counts))
    .join("\n");
  const domains = Object.entries(progress.per_domain)
    .map(([domain, counts]) => countsRow(domain, counts))
    .join("\n");
  const annotators = Object.entries(progress.per_annotator)
    .map(([id, n]) => `<tr><td>${escapeHtml(id)}</td><td>${n}</td></tr>`)
    .join("\n");
  return `
<section class="progress">
  <h2>Progress (round ${progress.round})</h2>
  <p>${progress.pending} pending &middot; ${progress.accepted} accepted &middot; ${progress.rejected} rejected</p>
  <table class="by-emotion"><thead><tr><th>emotion</th><th>pending</th><th>accepted</th><th>rejected</th></tr></thead>
  <tbody>${emotions}</tbody></table>
  <table class="by-domain"><thead><tr><th>domain</th><th>pending</th><th>accepted</th><th>rejected</th></tr></thead>
  <tbody>${domains}</tbody></table>
  <table class="by-annotator"><thead><tr><th>annotator</th><th>completed</th></tr></thead>
  <tbody>${annotators}</tbody></table>
</section>`;
}

export function renderAgreement(agreement: Agreement): string {
  const emotions = Object.entries(agreement.per_emotion)
    .map(
      ([emotion, counts]) =>
        `<tr><td>${escapeHtml(emotion)}</td><td>${counts.accepted}</td><td>${counts.rejected}</td></tr>`,
    )
    .join("\n");
  const domains = Object.entries(agreement.per_domain)
    .map(
      ([domain, counts]) =>
        `<tr><td>${escapeHtml(domain)}</td><td>${counts.accepted}</td><td>${counts.rejected}</td></tr>`,
    )
    .join("\n");
  const deficits = Object.entries(agreement.deficit)
    .map(
      ([emotion, needed]) =>
        `<tr class="${needed > 0 ? "short" : "met"}"><td>${escapeHtml(emotion)}</td><td>${agreement.targets[emotion] ?? 0}</td><td>${needed}</td></tr>`,
    )
    .join("\n");
  const residual = Object.values(agreement.deficit).some((v) => v > 0);
  const terminal =
    agreement.round >= 3 && residual
      ? `<p class="terminal">Final round reached; the remaining deficit will not be chased further.</p>`
      : "";
  return `
<section class="agreement">
  <h2>Agreement (round ${agreement.round} of 3)</h2>
  <table class="by-emotion"><thead><tr><th>emotion</th><th>accepted</th><th>rejected</th></tr></thead>
  <tbody>${emotions}</tbody></table>
  <table class="by-domain"><thead><tr><th>domain</th><th>accepted</th><th>rejected</th></tr></thead>
  <tbody>${domains}</tbody></table>
  <h3>Deficit</h3>
  <table class="deficit"><thead><tr><th>emotion</th><th>target</th><th>still needed</th></tr></thead>
  <tbody>${deficits}</tbody></table>
  ${terminal}
</section>`;
}
