// In-memory stand-in for the session API, implementing the documented JSON
// contract (create session, post message, history, trace, health) with
// canned desk-graph turns.

import { TurnResult, TurnTrace } from "../src/api.js";

const E = "http://desk.example/e/";
const P = "http://desk.example/p/";

export const CANNED_TURNS: Record<string, { result: Omit<TurnResult, "question">; trace: TurnTrace }> = {
  "Who is the author of Harry Potter?": {
    result: {
      standalone_question: "Who is the author of Harry Potter?",
      answers: [{ kind: "entity", value: `${E}J_K_Rowling`, display_label: "J. K. Rowling" }],
      final_text: null,
      degraded_flags: [],
      error: null,
      executed_queries: 1,
    },
    trace: {
      question: "Who is the author of Harry Potter?",
      qir: {
        entities: ["Harry Potter"],
        variables: ["?author"],
        relations: ["author of"],
        facts: [["?author", "author of", "Harry Potter"]],
        form: "list",
        target_variable: "?author",
      },
      linking: { ent_to_vertex: { "Harry Potter": `${E}Harry_Potter` }, rel_to_pred: {} },
      candidates: [],
      all_predicates: [`${P}author`],
      kept_predicates: [`${P}author`],
      executed: [{ sparql: "SELECT ?author WHERE { ... }", results: [`${E}J_K_Rowling`] }],
    },
  },
  "When was its first movie released?": {
    result: {
      standalone_question: "When was the first Harry Potter movie released?",
      answers: [{ kind: "literal", value: "2001", display_label: null }],
      final_text: null,
      degraded_flags: [],
      error: null,
      executed_queries: 1,
    },
    trace: {
      question: "When was the first Harry Potter movie released?",
      qir: {
        entities: ["Harry Potter"],
        variables: ["?year"],
        relations: ["released"],
        facts: [["Harry Potter", "released", "?year"]],
        form: "list",
        target_variable: "?year",
      },
      linking: { ent_to_vertex: { "Harry Potter": `${E}Harry_Potter` }, rel_to_pred: {} },
      candidates: [],
      all_predicates: [`${P}firstMovieReleaseYear`],
      kept_predicates: [`${P}firstMovieReleaseYear`],
      executed: [{ sparql: "SELECT ?year WHERE { ... }", results: ["2001"] }],
    },
  },
  "Who founded Intel?": {
    result: {
      standalone_question: "Who founded Intel?",
      answers: [
        { kind: "entity", value: `${E}Gordon_Moore`, display_label: "Gordon Moore" },
        { kind: "entity", value: `${E}Robert_Noyce`, display_label: "Robert Noyce" },
      ],
      final_text: null,
      degraded_flags: [],
      error: null,
      executed_queries: 3,
    },
    trace: {
      question: "Who founded Intel?",
      qir: {
        entities: ["Intel"],
        variables: ["?who"],
        relations: ["founded"],
        facts: [["?who", "founded", "Intel"]],
        form: "list",
        target_variable: "?who",
      },
      linking: { ent_to_vertex: { Intel: `${E}Intel` }, rel_to_pred: {} },
      candidates: [
        { sparql: "Q1", predicates: [`${P}foundedBy`], rank_cost: 0, selected: true },
        { sparql: "Q2", predicates: [`${P}founder`], rank_cost: 1, selected: true },
        { sparql: "Q3", predicates: [`${P}founders`], rank_cost: 2, selected: true },
        { sparql: "Q4", predicates: [`${P}location`], rank_cost: 3, selected: false },
      ],
      all_predicates: [`${P}foundedBy`, `${P}founder`, `${P}founders`, `${P}location`],
      kept_predicates: [`${P}foundedBy`, `${P}founder`, `${P}founders`],
      executed: [
        { sparql: "Q1", results: [`${E}Gordon_Moore`, `${E}Robert_Noyce`] },
        { sparql: "Q2", results: [`${E}Gordon_Moore`, `${E}Robert_Noyce`] },
        { sparql: "Q3", results: [`${E}Gordon_Moore`, `${E}Robert_Noyce`] },
      ],
    },
  },
};

interface SessionData {
  history: { question: string; answers: TurnResult["answers"]; final_text: string | null; degraded_flags: string[] }[];
  traces: TurnTrace[];
  inFlight: boolean;
}

export class FakeServer {
  sessions = new Map<string, SessionData>();
  postCount = 0;
  private counter = 0;
  // When set, in-flight turns only complete after this promise resolves.
  gate: Promise<void> | null = null;

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://fake.local");
    const path = url.pathname;
    const method = (init?.method ?? "GET").toUpperCase();

    if (path === "/healthz") return json({ status: "ok" });

    if (path === "/sessions" && method === "POST") {
      const id = `fake-${++this.counter}`;
      this.sessions.set(id, { history: [], traces: [], inFlight: false });
      return json({ session_id: id });
    }

    const messageMatch = path.match(/^\/sessions\/([^/]+)\/messages$/);
    if (messageMatch && method === "POST") {
      const session = this.sessions.get(messageMatch[1]);
      if (!session) return json({ detail: "unknown session" }, 404);
      if (session.inFlight) return json({ detail: "turn in flight" }, 409);
      this.postCount += 1;
      session.inFlight = true;
      try {
        if (this.gate) await this.gate;
        const { question } = JSON.parse(String(init?.body ?? "{}")) as { question: string };
        const canned = CANNED_TURNS[question];
        const result: TurnResult = canned
          ? { question, ...canned.result }
          : {
              question,
              standalone_question: question,
              answers: [],
              final_text: null,
              degraded_flags: [],
              error: { stage: "linking", message: "no vertex candidates" },
              executed_queries: 0,
            };
        session.history.push({
          question,
          answers: result.answers,
          final_text: result.final_text,
          degraded_flags: result.degraded_flags,
        });
        session.traces.push(canned ? canned.trace : emptyTrace(question));
        return json(result);
      } finally {
        session.inFlight = false;
      }
    }

    const historyMatch = path.match(/^\/sessions\/([^/]+)\/history$/);
    if (historyMatch && method === "GET") {
      const session = this.sessions.get(historyMatch[1]);
      if (!session) return json({ detail: "unknown session" }, 404);
      return json(session.history);
    }

    const traceMatch = path.match(/^\/sessions\/([^/]+)\/trace\/(\d+)$/);
    if (traceMatch && method === "GET") {
      const session = this.sessions.get(traceMatch[1]);
      if (!session) return json({ detail: "unknown session" }, 404);
      const index = Number(traceMatch[2]) - 1;
      const trace = session.traces[index];
      if (!trace) return json({ detail: "no trace" }, 404);
      return json(trace);
    }

    return json({ detail: `no route: ${method} ${path}` }, 404);
  };
}

function emptyTrace(question: string): TurnTrace {
  return {
    question,
    qir: null,
    linking: null,
    candidates: [],
    all_predicates: [],
    kept_predicates: [],
    executed: [],
  };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
