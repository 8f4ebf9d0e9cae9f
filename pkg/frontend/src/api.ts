// HTTP client for the kgchat session API.

export interface UiAnswer {
  kind: string;
  value: string;
  display_label: string | null;
}

export interface TurnResult {
  question: string;
  standalone_question: string | null;
  answers: UiAnswer[];
  final_text: string | null;
  degraded_flags: string[];
  error: { stage: string; message: string } | null;
  executed_queries: number;
}

export interface HistoryEntry {
  question: string;
  answers: UiAnswer[];
  final_text: string | null;
  degraded_flags: string[];
}

export interface TraceCandidate {
  sparql: string;
  predicates: string[];
  rank_cost: number;
  selected: boolean;
}

export interface TurnTrace {
  question: string;
  qir: {
    entities: string[];
    variables: string[];
    relations: string[];
    facts: [string, string, string][];
    form: string;
    target_variable: string | null;
  } | null;
  linking: {
    ent_to_vertex: Record<string, string>;
    rel_to_pred: Record<string, [string, number][]>;
  } | null;
  candidates: TraceCandidate[];
  all_predicates: string[];
  kept_predicates: string[];
  executed: { sparql: string; results?: string[]; error?: string }[];
}

export class ConflictError extends Error {}
export class NotFoundError extends Error {}
export class TraceDisabledError extends Error {}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (res.status === 404) throw new NotFoundError(`not found: ${path}`);
    if (res.status === 409) throw new ConflictError("a turn is already in flight");
    if (!res.ok) throw new Error(`request failed (${res.status}): ${path}`);
    return res;
  }

  async createSession(overrides: Record<string, unknown> = {}): Promise<string> {
    const res = await this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(overrides),
    });
    const body = (await res.json()) as { session_id: string };
    return body.session_id;
  }

  async postMessage(sessionId: string, question: string): Promise<TurnResult> {
    const res = await this.request(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    return (await res.json()) as TurnResult;
  }

  async getHistory(sessionId: string): Promise<HistoryEntry[]> {
    const res = await this.request(`/sessions/${sessionId}/history`);
    return (await res.json()) as HistoryEntry[];
  }

  async getTrace(sessionId: string, turn: number): Promise<TurnTrace> {
    try {
      const res = await this.request(`/sessions/${sessionId}/trace/${turn}`);
      return (await res.json()) as TurnTrace;
    } catch (err) {
      if (err instanceof NotFoundError) throw new TraceDisabledError(`no trace for turn ${turn}`);
      throw err;
    }
  }

  async healthy(): Promise<boolean> {
    try {
      const res = await this.fetchImpl(this.baseUrl + "/healthz");
      return res.ok;
    } catch {
      return false;
    }
  }
}
