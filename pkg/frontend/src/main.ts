// DOM wiring: one session per page, session id kept in the URL hash so a
// refresh restores the conversation from GET /history.

import { ApiClient, ConflictError, TraceDisabledError } from "./api.js";
import { beginSend, completeSend, emptySession, failSend, restoreFromHistory, UiSession } from "./state.js";
import { renderConversation, renderTrace, renderTraceDisabled } from "./render.js";

const baseUrl = (window as unknown as { KGCHAT_BASE_URL?: string }).KGCHAT_BASE_URL ?? "";
const api = new ApiClient(baseUrl);
const state: UiSession = emptySession();

const conversation = document.getElementById("conversation") as HTMLElement;
const tracePanel = document.getElementById("trace-panel") as HTMLElement;
const input = document.getElementById("question") as HTMLInputElement;
const sendButton = document.getElementById("send") as HTMLButtonElement;

function refresh(): void {
  conversation.innerHTML = renderConversation(state);
  input.disabled = state.pending;
  sendButton.disabled = state.pending;
  conversation.querySelectorAll<HTMLButtonElement>(".trace-btn").forEach((button) => {
    button.addEventListener("click", () => showTrace(Number(button.dataset.turn)));
  });
  conversation.scrollTop = conversation.scrollHeight;
}

async function ensureSession(): Promise<string> {
  if (state.sessionId) return state.sessionId;
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    try {
      const history = await api.getHistory(fromHash);
      state.sessionId = fromHash;
      restoreFromHistory(state, history);
      refresh();
      return fromHash;
    } catch {
      // stale id in the hash: fall through and create a fresh session
    }
  }
  const sessionId = await api.createSession({});
  state.sessionId = sessionId;
  window.location.hash = sessionId;
  return sessionId;
}

async function send(): Promise<void> {
  const question = input.value;
  if (!beginSend(state, question)) return; // pending: click ignored
  input.value = "";
  refresh();
  try {
    const sessionId = await ensureSession();
    const result = await api.postMessage(sessionId, question);
    const turn = state.bubbles.filter((b) => b.role === "assistant").length + 1;
    completeSend(state, result, turn);
  } catch (err) {
    if (err instanceof ConflictError) {
      failSend(state, "A turn is already running; wait for it to finish.");
    } else {
      failSend(state, `Request failed: ${err instanceof Error ? err.message : String(err)}`);
    }
  }
  refresh();
}

async function showTrace(turn: number): Promise<void> {
  if (!state.sessionId) return;
  try {
    const trace = await api.getTrace(state.sessionId, turn);
    tracePanel.innerHTML = renderTrace(trace);
  } catch (err) {
    tracePanel.innerHTML = err instanceof TraceDisabledError
      ? renderTraceDisabled()
      : `<p class='trace-note'>trace unavailable</p>`;
  }
  tracePanel.classList.remove("hidden");
}

sendButton.addEventListener("click", () => void send());
input.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void send();
});

void ensureSession().then(refresh);
refresh();
