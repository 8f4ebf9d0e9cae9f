// Client-side session state. The only mutable state beyond the session id
// is the message list and one pending flag, which mirrors the server's
// one-turn-in-flight rule and makes double-send structurally impossible.

import { HistoryEntry, TurnResult, UiAnswer } from "./api.js";

export const NOT_FOUND_TEXT = "The requested information is not found in the knowledge graph.";

export interface Bubble {
  role: "user" | "assistant";
  text: string;
  degraded: boolean;
  errorStage: string | null;
  turn: number | null; // 1-based turn index for assistant bubbles (trace lookup)
}

export interface UiSession {
  sessionId: string | null;
  bubbles: Bubble[];
  pending: boolean;
  banner: string | null;
}

export function emptySession(): UiSession {
  return { sessionId: null, bubbles: [], pending: false, banner: null };
}

export function answerText(answers: UiAnswer[], finalText: string | null): string {
  if (finalText) return finalText;
  if (answers.length === 0) return NOT_FOUND_TEXT;
  return answers.map((a) => a.display_label ?? a.value).join(", ");
}

// Returns false when a send is already pending: the caller must not issue
// a request, so a double-click can never double-post.
export function beginSend(state: UiSession, question: string): boolean {
  if (state.pending || !question.trim()) return false;
  state.pending = true;
  state.banner = null;
  state.bubbles.push({ role: "user", text: question, degraded: false, errorStage: null, turn: null });
  return true;
}

export function completeSend(state: UiSession, result: TurnResult, turn: number): void {
  state.pending = false;
  state.bubbles.push({
    role: "assistant",
    text: answerText(result.answers, result.final_text),
    degraded: result.degraded_flags.length > 0 || result.error !== null,
    errorStage: result.error ? result.error.stage : null,
    turn,
  });
}

export function failSend(state: UiSession, message: string): void {
  // The optimistic user bubble stays; the banner explains what happened.
  state.pending = false;
  state.banner = message;
}

export function restoreFromHistory(state: UiSession, history: HistoryEntry[]): void {
  state.bubbles = [];
  history.forEach((entry, index) => {
    state.bubbles.push({
      role: "user",
      text: entry.question,
      degraded: false,
      errorStage: null,
      turn: null,
    });
    state.bubbles.push({
      role: "assistant",
      text: answerText(entry.answers, entry.final_text),
      degraded: entry.degraded_flags.length > 0,
      errorStage: null,
      turn: index + 1,
    });
  });
  state.pending = false;
}
