// Pure HTML renderers. Every visible answer string comes from a service
// response field; nothing is synthesized client-side.

import { TurnTrace } from "./api.js";
import { UiSession } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderConversation(state: UiSession): string {
  if (state.bubbles.length === 0) {
    return '<p class="empty-state">Ask a question about the knowledge graph to get started.</p>';
  }
  const parts: string[] = [];
  for (const bubble of state.bubbles) {
    const classes = ["bubble", bubble.role];
    if (bubble.degraded) classes.push("degraded");
    const badge = bubble.degraded
      ? `<span class="badge" title="degraded turn">&#9888;${
          bubble.errorStage ? " " + escapeHtml(bubble.errorStage) : ""
        }</span>`
      : "";
    const traceButton =
      bubble.role === "assistant" && bubble.turn !== null
        ? `<button class="trace-btn" data-turn="${bubble.turn}">trace</button>`
        : "";
    parts.push(
      `<div class="${classes.join(" ")}">${escapeHtml(bubble.text)}${badge}${traceButton}</div>`,
    );
  }
  if (state.banner) {
    parts.push(`<div class="banner">${escapeHtml(state.banner)}</div>`);
  }
  return parts.join("\n");
}

export function renderTrace(trace: TurnTrace): string {
  const parts: string[] = [`<h3>Turn trace</h3>`];
  if (trace.qir) {
    const facts = trace.qir.facts
      .map(([s, r, o]) => `<li>&lt;${escapeHtml(s)}, ${escapeHtml(r)}, ${escapeHtml(o)}&gt;</li>`)
      .join("");
    parts.push(
      `<section><h4>Extracted facts (${escapeHtml(trace.qir.form)})</h4><ul>${facts}</ul></section>`,
    );
  }
  if (trace.linking) {
    const links = Object.entries(trace.linking.ent_to_vertex)
      .map(([phrase, iri]) => `<li>${escapeHtml(phrase)} &rarr; ${escapeHtml(iri)}</li>`)
      .join("");
    parts.push(`<section><h4>Linked vertices</h4><ul>${links}</ul></section>`);
  }
  const kept = new Set(trace.kept_predicates);
  const predicates = trace.all_predicates
    .map((iri) => {
      const label = escapeHtml(iri);
      return kept.has(iri)
        ? `<li class="kept">${label}</li>`
        : `<li class="pruned"><s>${label}</s></li>`;
    })
    .join("");
  parts.push(`<section><h4>Predicates (kept vs pruned)</h4><ul>${predicates}</ul></section>`);
  const executed = trace.executed
    .map((entry) => {
      const outcome = entry.error
        ? `<span class="error">${escapeHtml(entry.error)}</span>`
        : escapeHtml((entry.results ?? []).join(", ") || "(no rows)");
      return `<li><pre>${escapeHtml(entry.sparql)}</pre>${outcome}</li>`;
    })
    .join("");
  parts.push(`<section><h4>Executed queries</h4><ul>${executed}</ul></section>`);
  return parts.join("\n");
}

export function renderTraceDisabled(): string {
  return "<p class='trace-note'>trace disabled for this turn</p>";
}
