"""Top-level turn controller.

Each turn walks an explicit route graph whose nodes read and write the
shared :class:`SessionState`; transitions are data (an edge table), so route
soundness is checkable. A failed stage still appends an empty turn to the
dialogue, keeping the history index space consistent for later turns.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from kgchat.errors import PipelineError
from kgchat.kg.http import SparqlEndpoint
from kgchat.kg.store import TripleStore
from kgchat.kg.terms import KgError
from kgchat.llm import LlmError, PromptLibrary, backend_from_spec
from kgchat.matching import HttpEmbedder, TrigramEmbedder, link
from kgchat.model import (
    Answer,
    EngineConfig,
    SessionState,
    append_turn,
    build_context,
)
from kgchat.planning import TurnTrace, plan_and_execute
from kgchat.understanding import QuestionType, classify, extract_qir, rephrase

END = "END"

ROUTE_EDGES: dict[str, tuple[str, ...]] = {
    "chat_agent": ("classifier_agent", "qir_agent", END),
    "classifier_agent": ("rephraser_agent", "qir_agent"),
    "rephraser_agent": ("qir_agent",),
    "qir_agent": ("matching_agent",),
    "matching_agent": ("query_agent",),
    "query_agent": ("chat_agent",),
}

_MAX_ROUTE_STEPS = 32

NOT_FOUND_SENTENCE = "The requested information is not found in the knowledge graph."

TRANSLATION_FALLBACK_FLAG = "translation_fallback"
REFORMULATE_FALLBACK_FLAG = "reformulate_fallback"


class TurnInFlightError(Exception):
    """A second turn was started while one was already running for the session."""


@dataclass
class TurnResult:
    answers: list[Answer] = field(default_factory=list)
    final_text: Optional[str] = None
    degraded_flags: set[str] = field(default_factory=set)
    trace_ref: Optional[str] = None
    trace: Optional[dict] = None
    error: Optional[tuple[str, str]] = None  # (stage, message)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    executed_queries: int = 0
    route_trace: list[str] = field(default_factory=list)
    question: str = ""
    standalone_question: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "question": self.question,
            "standalone_question": self.standalone_question,
            "answers": [
                {"kind": a.kind, "value": a.value, "display_label": a.display_label}
                for a in self.answers
            ],
            "final_text": self.final_text,
            "degraded_flags": sorted(self.degraded_flags),
            "error": {"stage": self.error[0], "message": self.error[1]} if self.error else None,
            "trace_ref": self.trace_ref,
            "executed_queries": self.executed_queries,
            "stage_seconds": self.stage_seconds,
            "route_trace": list(self.route_trace),
        }


def reformulate_answer(
    answers: list[Answer], question: str, prompts: PromptLibrary, backend
) -> tuple[str, Optional[str]]:
    """Phrase the raw answers as one fluent sentence; an empty answer set
    short-circuits to the fixed not-found sentence without an LLM call."""
    if not answers:
        return NOT_FOUND_SENTENCE, None
    rendered = ", ".join(a.shown() for a in answers)
    request = prompts.build_request("final_answer", question=question, answers=rendered)
    try:
        response = backend.complete(request)
    except LlmError:
        return rendered, REFORMULATE_FALLBACK_FLAG
    text = response.raw_text.strip()
    if not text:
        return rendered, REFORMULATE_FALLBACK_FLAG
    return text, None


def translate_question(question: str, prompts: PromptLibrary, backend) -> tuple[str, Optional[str]]:
    """Translate the question to English before the pipeline runs; on LLM
    failure the original text proceeds with a degraded flag."""
    if not question.strip():
        raise ValueError("cannot translate an empty question")
    request = prompts.build_request("translate", question=question)
    try:
        response = backend.complete(request)
    except LlmError:
        return question, TRANSLATION_FALLBACK_FLAG
    text = response.raw_text.strip()
    if not text:
        return question, TRANSLATION_FALLBACK_FLAG
    return text, None


def check_route_graph() -> None:
    """Static sanity of the edge table: all targets declared, END reachable
    from every node."""
    nodes = set(ROUTE_EDGES)
    for source, targets in ROUTE_EDGES.items():
        for target in targets:
            if target != END and target not in nodes:
                raise RuntimeError(f"route edge {source} -> {target} leads nowhere")
    reach_end = set()
    changed = True
    while changed:
        changed = False
        for source, targets in ROUTE_EDGES.items():
            if source in reach_end:
                continue
            if any(t == END or t in reach_end for t in targets):
                reach_end.add(source)
                changed = True
    missing = nodes - reach_end
    if missing:
        raise RuntimeError(f"nodes cannot reach END: {sorted(missing)}")


class Engine:
    """Wires the agents to one KG target, one LLM backend, and one embedder.

    Per-session runtime knobs (mode, retry bound, limits) come from the
    config passed to :meth:`process_turn`; the target and backend are fixed
    at construction.
    """

    def __init__(
        self,
        config: EngineConfig,
        target=None,
        backend=None,
        prompts: Optional[PromptLibrary] = None,
        embedder=None,
    ):
        check_route_graph()
        self.config = config
        if target is not None:
            self.target = target
        elif config.store_file:
            self.target = TripleStore.from_file(config.store_file, config.label_predicates)
        elif config.endpoint_url:
            self.target = SparqlEndpoint(config.endpoint_url)
        else:
            raise ValueError("engine needs a store file or an endpoint URL")
        self.backend = backend if backend is not None else backend_from_spec(config.llm_backend)
        self.prompts = prompts or PromptLibrary.bundled()
        if embedder is not None:
            self.embedder = embedder
        elif config.embedder_url:
            self.embedder = HttpEmbedder(config.embedder_url, config.embedder_model)
        else:
            self.embedder = TrigramEmbedder()
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def new_session(self, session_id: Optional[str] = None) -> SessionState:
        return SessionState(session_id=session_id or uuid.uuid4().hex)

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    # -- one turn ------------------------------------------------------------

    def process_turn(
        self, state: SessionState, question: str, config: Optional[EngineConfig] = None
    ) -> TurnResult:
        if not question.strip():
            raise ValueError("question must be non-empty")
        lock = self._session_lock(state.session_id)
        if not lock.acquire(blocking=False):
            raise TurnInFlightError(f"session {state.session_id} already has a turn in flight")
        try:
            return self._run_turn(state, question, config or self.config)
        finally:
            lock.release()

    def _run_turn(self, state: SessionState, question: str, config: EngineConfig) -> TurnResult:
        result = TurnResult(question=question)
        trace = TurnTrace()
        state.reset_for_turn(question)

        pipeline_question = question
        if config.translation_enabled:
            pipeline_question, flag = translate_question(question, self.prompts, self.backend)
            if flag:
                result.degraded_flags.add(flag)
        state.current_question = pipeline_question

        timer = _StageTimer()
        try:
            node = "chat_agent"
            steps = 0
            while node != END:
                steps += 1
                if steps > _MAX_ROUTE_STEPS:
                    raise RuntimeError("route did not terminate")
                result.route_trace.append(node)
                next_node = self._run_node(node, state, config, result, trace, timer)
                if next_node not in ROUTE_EDGES[node]:
                    raise RuntimeError(f"undeclared route transition {node} -> {next_node}")
                state.route = next_node
                node = next_node
            result.route_trace.append(END)
        except PipelineError as exc:
            result.error = (exc.stage, exc.message)
            result.answers = []
            state.answer = []
            # A failed stage is an exceptional transition to the terminal
            # tag: the route sequence still ends at END.
            state.route = END
            result.route_trace.append(END)
        result.stage_seconds = timer.totals

        # History grows by exactly one turn, success or failure, so later
        # context building sees a consistent index space.
        state.dialogue = append_turn(state.dialogue, question, result.answers)

        result.standalone_question = state.standalone_question
        trace.qir = _qir_dict(state.qir) if state.qir is not None else None
        trace.linking = _linking_dict(state.linking) if state.linking is not None else None
        result.trace = trace.as_dict()
        if config.trace_dir:
            result.trace_ref = self._write_trace(state, result.trace, config.trace_dir)
        return result

    def _run_node(
        self,
        node: str,
        state: SessionState,
        config: EngineConfig,
        result: TurnResult,
        trace: TurnTrace,
        timer: "_StageTimer",
    ) -> str:
        if node == "chat_agent":
            if state.query_done:
                if config.reformulation_enabled:
                    text, flag = reformulate_answer(
                        result.answers, state.current_question, self.prompts, self.backend
                    )
                    result.final_text = text
                    if flag:
                        result.degraded_flags.add(flag)
                return END
            state.context = build_context(state.dialogue, config.context_limit)
            if config.system_mode == "single_turn":
                state.standalone_question = state.current_question
                return "qir_agent"
            return "classifier_agent"

        if node == "classifier_agent":
            with timer.stage("qu"):
                question_type = classify(state.current_question, self.prompts, self.backend)
            if question_type is QuestionType.DEPENDENT:
                return "rephraser_agent"
            state.standalone_question = state.current_question
            return "qir_agent"

        if node == "rephraser_agent":
            with timer.stage("qu"):
                standalone, flag = rephrase(
                    state.current_question, state.context, self.prompts, self.backend
                )
            state.standalone_question = standalone
            if flag:
                result.degraded_flags.add(flag)
            return "qir_agent"

        if node == "qir_agent":
            standalone = state.standalone_question or state.current_question
            with timer.stage("qu"):
                state.qir = extract_qir(standalone, config.theta, self.prompts, self.backend)
            state.qir_done = True
            return "matching_agent"

        if node == "matching_agent":
            flags: set[str] = set()
            try:
                with timer.stage("linking"):
                    state.linking = link(
                        state.qir,
                        config,
                        self.target,
                        self.prompts,
                        self.backend,
                        self.embedder,
                        flags,
                    )
            except KgError as exc:
                raise PipelineError("linking", f"KG access failed: {exc}") from exc
            result.degraded_flags |= flags
            return "query_agent"

        if node == "query_agent":
            standalone = state.standalone_question or state.current_question
            with timer.stage("execution_filtration"):
                answers, flags, executed = plan_and_execute(
                    standalone,
                    state.qir,
                    state.linking,
                    config,
                    self.target,
                    self.prompts,
                    self.backend,
                    trace=trace,
                )
            result.answers = answers
            result.degraded_flags |= flags
            result.executed_queries = executed
            state.answer = answers
            state.query_done = True
            return "chat_agent"

        raise RuntimeError(f"unknown route node: {node}")

    def _write_trace(self, state: SessionState, trace: dict, trace_dir: str) -> str:
        os.makedirs(trace_dir, exist_ok=True)
        turn_index = len(state.dialogue.turns)
        path = os.path.join(trace_dir, f"{state.session_id}-turn{turn_index}.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(trace, handle, indent=2)
        return path


class _StageTimer:
    def __init__(self):
        self.totals: dict[str, float] = {}

    def stage(self, name: str) -> "_StageSpan":
        return _StageSpan(self, name)


class _StageSpan:
    def __init__(self, timer: _StageTimer, name: str):
        self.timer = timer
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc_info):
        elapsed = time.perf_counter() - self.start
        self.timer.totals[self.name] = self.timer.totals.get(self.name, 0.0) + elapsed
        return False


def _qir_dict(qir) -> dict:
    def term_str(term):
        return term.phrase if hasattr(term, "phrase") else term.name

    return {
        "entities": list(qir.entities),
        "variables": list(qir.variables),
        "relations": list(qir.relations),
        "facts": [
            [term_str(f.subject), f.relation, term_str(f.object)] for f in qir.facts
        ],
        "form": qir.form,
        "target_variable": qir.target_variable,
    }


def _linking_dict(linking) -> dict:
    return {
        "ent_to_vertex": dict(linking.ent_to_vertex),
        "rel_to_pred": {
            rel: [[iri, score] for iri, score in preds]
            for rel, preds in linking.rel_to_pred.items()
        },
    }
