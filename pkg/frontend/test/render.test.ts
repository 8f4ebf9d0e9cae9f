import { describe, expect, it } from "vitest";

import { escapeHtml, renderConversation, renderTrace, renderTraceDisabled } from "../src/render.js";
import { emptySession, restoreFromHistory } from "../src/state.js";
import { CANNED_TURNS } from "./fakeServer.js";

describe("renderConversation", () => {
  it("empty history shows the empty-state prompt", () => {
    const html = renderConversation(emptySession());
    expect(html).toContain("empty-state");
  });

  it("renders four bubbles for a two-turn dialogue, second answer 2001", () => {
    const state = emptySession();
    restoreFromHistory(state, [
      {
        question: "Who is the author of Harry Potter?",
        answers: [{ kind: "entity", value: "http://e/J_K_Rowling", display_label: "J. K. Rowling" }],
        final_text: null,
        degraded_flags: [],
      },
      {
        question: "When was its first movie released?",
        answers: [{ kind: "literal", value: "2001", display_label: null }],
        final_text: null,
        degraded_flags: [],
      },
    ]);
    const html = renderConversation(state);
    expect(html.match(/class="bubble/g)).toHaveLength(4);
    expect(html).toContain("2001");
    expect(html).toContain("J. K. Rowling");
  });

  it("degraded turns carry a visible badge", () => {
    const state = emptySession();
    restoreFromHistory(state, [
      {
        question: "q",
        answers: [],
        final_text: null,
        degraded_flags: ["predicate_filter_fallback"],
      },
    ]);
    const html = renderConversation(state);
    expect(html).toContain("badge");
    expect(html).toContain("degraded");
    expect(html).toContain("not found in the knowledge graph");
  });

  it("escapes question text", () => {
    const state = emptySession();
    restoreFromHistory(state, [
      { question: "<script>alert(1)</script>", answers: [], final_text: null, degraded_flags: [] },
    ]);
    const html = renderConversation(state);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });

  it("never invents answer text: bubbles come from response fields only", () => {
    const state = emptySession();
    const served = "Gordon Moore";
    restoreFromHistory(state, [
      {
        question: "Who founded Intel?",
        answers: [{ kind: "entity", value: "http://e/Gordon_Moore", display_label: served }],
        final_text: null,
        degraded_flags: [],
      },
    ]);
    const html = renderConversation(state);
    const assistant = state.bubbles[1];
    expect(html).toContain(escapeHtml(assistant.text));
    expect(assistant.text).toBe(served);
  });
});

describe("renderTrace", () => {
  it("shows pruned predicates struck through and kept ones plain", () => {
    const html = renderTrace(CANNED_TURNS["Who founded Intel?"].trace);
    expect(html).toContain("<s>http://desk.example/p/location</s>");
    expect(html).not.toContain("<s>http://desk.example/p/founders</s>");
    expect(html).toContain('class="kept"');
  });

  it("shows extracted facts and executed SPARQL", () => {
    const trace = CANNED_TURNS["When was its first movie released?"].trace;
    const html = renderTrace(trace);
    expect(html).toContain("Harry Potter, released, ?year");
    expect(html).toContain("<pre>SELECT ?year WHERE { ... }</pre>");
  });

  it("missing trace renders the disabled note", () => {
    expect(renderTraceDisabled()).toContain("trace disabled");
  });
});
