"""Shared domain types, configuration, and per-session state.

Everything here is a plain value object except :class:`SessionState`,
which is mutable and confined to one in-flight turn at a time by the
orchestrator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

ANSWER_KINDS = ("entity", "literal", "count", "boolean")

QUERY_FORMS = ("list", "count", "boolean")

SYSTEM_MODES = ("multi_turn", "single_turn")

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

_VARIABLE_RE = re.compile(r"^\?[A-Za-z_][A-Za-z0-9_]*$")

_IRI_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*://\S+$|^urn:\S+$")


class ModelError(ValueError):
    """Raised when a domain value violates its invariants."""


@dataclass(frozen=True)
class Answer:
    """One atomic answer: a KG entity, a literal, a count, or a boolean."""

    kind: str
    value: str
    display_label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ANSWER_KINDS:
            raise ModelError(f"unknown answer kind: {self.kind!r}")
        if self.kind == "count":
            if not self.value.isdigit():
                raise ModelError(f"count answer must be a non-negative integer: {self.value!r}")
        elif self.kind == "boolean":
            if self.value not in ("true", "false"):
                raise ModelError(f"boolean answer must be 'true' or 'false': {self.value!r}")
        elif self.kind == "entity":
            if not _IRI_RE.match(self.value):
                raise ModelError(f"entity answer must be an absolute IRI: {self.value!r}")

    def shown(self) -> str:
        """Human-facing string: the label when known, else the raw value."""
        return self.display_label or self.value


@dataclass(frozen=True)
class Turn:
    """One completed exchange: the question and the raw answers it produced."""

    question: str
    answers: tuple[Answer, ...]
    asked_at: int


@dataclass(frozen=True)
class Dialogue:
    """Append-only history of turns; past turns are never rewritten."""

    turns: tuple[Turn, ...] = ()

    def __len__(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class QuestionContext:
    """Per-turn (question, truncated answers) pairs fed to context-aware prompts."""

    pairs: tuple[tuple[str, tuple[Answer, ...]], ...] = ()

    def is_empty(self) -> bool:
        return not self.pairs

    def render(self) -> str:
        """Plain-text rendering used as LLM prompt context."""
        lines = []
        for i, (question, answers) in enumerate(self.pairs, start=1):
            shown = ", ".join(a.shown() for a in answers) if answers else "(no results)"
            lines.append(f"Q{i}: {question}")
            lines.append(f"A{i}: {shown}")
        return "\n".join(lines)


def build_context(dialogue: Dialogue, limit: int) -> QuestionContext:
    """Build the prompt context: one pair per past turn, answers cut to the
    first ``limit`` items in execution order."""
    if limit < 1:
        raise ModelError("context answer limit must be >= 1")
    pairs = tuple((t.question, t.answers[:limit]) for t in dialogue.turns)
    return QuestionContext(pairs=pairs)


def append_turn(dialogue: Dialogue, question: str, answers: Sequence[Answer]) -> Dialogue:
    """Return a new dialogue with one more turn; existing turns are unchanged."""
    if not question.strip():
        raise ModelError("cannot append a turn with an empty question")
    turn = Turn(question=question, answers=tuple(answers), asked_at=len(dialogue.turns) + 1)
    return Dialogue(turns=dialogue.turns + (turn,))


@dataclass(frozen=True)
class EntityRef:
    """A known entity mention inside a fact (resolved later to a KG vertex)."""

    phrase: str


@dataclass(frozen=True)
class VarRef:
    """An unknown inside a fact; carries its SPARQL surface name ("?x")."""

    name: str

    def __post_init__(self) -> None:
        if not _VARIABLE_RE.match(self.name):
            raise ModelError(f"invalid variable name: {self.name!r}")


FactTerm = Union[EntityRef, VarRef]


@dataclass(frozen=True)
class Fact:
    """One relational fact extracted from a question: subject, relation phrase, object."""

    subject: FactTerm
    relation: str
    object: FactTerm

    def __post_init__(self) -> None:
        if not self.relation.strip():
            raise ModelError("fact relation phrase must be non-empty")

    def terms(self) -> tuple[FactTerm, FactTerm]:
        return (self.subject, self.object)


@dataclass(frozen=True)
class QIR:
    """Intermediate representation bridging the question and the graph.

    ``entities``/``variables``/``relations`` are kept in first-mention order
    (duplicate-free, so they behave as ordered sets); every fact endpoint must
    be drawn from them. ``target_variable`` names the unknown whose bindings
    answer the question; boolean questions may have no variables at all.
    """

    entities: tuple[str, ...]
    variables: tuple[str, ...]
    relations: tuple[str, ...]
    facts: tuple[Fact, ...]
    form: str = "list"
    target_variable: Optional[str] = None

    def __post_init__(self) -> None:
        if self.form not in QUERY_FORMS:
            raise ModelError(f"unknown question form: {self.form!r}")
        if len(set(self.entities)) != len(self.entities):
            raise ModelError("duplicate entries in entities")
        if len(set(self.variables)) != len(self.variables):
            raise ModelError("duplicate entries in variables")
        if not self.entities:
            raise ModelError("a QIR must mention at least one known entity")
        if self.form != "boolean" and not self.variables:
            raise ModelError("a non-boolean QIR must have at least one variable")
        entity_set, variable_set = set(self.entities), set(self.variables)
        relation_set = set(self.relations)
        for fact in self.facts:
            for term in fact.terms():
                if isinstance(term, EntityRef):
                    if term.phrase not in entity_set:
                        raise ModelError(f"fact entity {term.phrase!r} missing from entities")
                elif term.name not in variable_set:
                    raise ModelError(f"fact variable {term.name!r} missing from variables")
            if fact.relation not in relation_set:
                raise ModelError(f"fact relation {fact.relation!r} missing from relations")
        if self.target_variable is not None and self.target_variable not in variable_set:
            raise ModelError(f"target variable {self.target_variable!r} missing from variables")
        if self.form != "boolean" and self.target_variable is None:
            raise ModelError("non-boolean QIR must name a target variable")


@dataclass(frozen=True)
class BackendSpec:
    """Descriptor of the LLM backend: HTTP chat-completion service or a
    scripted rules file for deterministic offline runs."""

    kind: str = "http"
    url: str = ""
    model: str = ""
    temperature: float = 0.0
    api_key_env: str = "KGCHAT_API_KEY"
    rules_file: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("http", "scripted"):
            raise ModelError(f"unknown backend kind: {self.kind!r}")


@dataclass(frozen=True)
class EngineConfig:
    """Engine-wide knobs; the defaults match the operating points the system
    was tuned for (retries 3, context prefix 100, vertex cap 600, query cap 40)."""

    theta: int = 3
    context_limit: int = 100
    vertex_limit: int = 600
    query_num: int = 40
    system_mode: str = "multi_turn"
    endpoint_url: str = ""
    store_file: str = ""
    label_predicates: tuple[str, ...] = (RDFS_LABEL,)
    llm_backend: BackendSpec = field(default_factory=BackendSpec)
    translation_enabled: bool = False
    reformulation_enabled: bool = False
    trace_dir: str = ""
    predicate_candidate_cap: Optional[int] = None
    embedder_url: str = ""
    embedder_model: str = ""

    def __post_init__(self) -> None:
        for name in ("theta", "context_limit", "vertex_limit", "query_num"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1")
        if self.system_mode not in SYSTEM_MODES:
            raise ModelError(f"unknown system mode: {self.system_mode!r}")
        if self.predicate_candidate_cap is not None and self.predicate_candidate_cap < 1:
            raise ModelError("predicate_candidate_cap must be >= 1 when set")

    def with_overrides(self, overrides: Mapping[str, object]) -> "EngineConfig":
        return _config_from_mapping(dict(overrides), base=self)


@dataclass
class SessionState:
    """Mutable state threaded through the agent graph for one session.

    Only one turn may be in flight per session; the orchestrator enforces
    that with a per-session lock.
    """

    session_id: str
    dialogue: Dialogue = field(default_factory=Dialogue)
    current_question: str = ""
    standalone_question: Optional[str] = None
    context: QuestionContext = field(default_factory=QuestionContext)
    qir: Optional[QIR] = None
    linking: Optional[object] = None
    answer: Optional[list[Answer]] = None
    route: str = "chat_agent"
    qir_done: bool = False
    query_done: bool = False

    def reset_for_turn(self, question: str) -> None:
        self.current_question = question
        self.standalone_question = None
        self.context = QuestionContext()
        self.qir = None
        self.linking = None
        self.answer = None
        self.route = "chat_agent"
        self.qir_done = False
        self.query_done = False


_CONFIG_FIELD_KEYS = {
    "theta": int,
    "context_limit": int,
    "vertex_limit": int,
    "query_num": int,
    "system_mode": str,
    "endpoint_url": str,
    "store_file": str,
    "translation_enabled": bool,
    "reformulation_enabled": bool,
    "trace_dir": str,
    "predicate_candidate_cap": int,
    "embedder_url": str,
    "embedder_model": str,
}

_BACKEND_FIELD_KEYS = {
    "kind": str,
    "url": str,
    "model": str,
    "temperature": float,
    "api_key_env": str,
    "rules_file": str,
}


def _coerce(value: object, target: type, key: str) -> object:
    if isinstance(value, bool) and target is bool:
        return value
    if isinstance(value, str):
        text = value.strip().strip('"').strip("'")
        if target is bool:
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ModelError(f"config key {key!r}: expected a boolean, got {value!r}")
        try:
            return target(text)
        except ValueError as exc:
            raise ModelError(f"config key {key!r}: {exc}") from exc
    if target is float and isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, target):
        return value
    raise ModelError(f"config key {key!r}: expected {target.__name__}, got {type(value).__name__}")


def _config_from_mapping(data: Mapping[str, object], base: Optional[EngineConfig] = None) -> EngineConfig:
    base = base or EngineConfig()
    kwargs: dict[str, object] = {}
    backend_kwargs: dict[str, object] = {}
    for raw_key, raw_value in data.items():
        key = raw_key.strip()
        if key in ("mode", "system_mode"):
            kwargs["system_mode"] = _coerce(raw_value, str, key)
        elif key == "label_predicates":
            if isinstance(raw_value, str):
                parts = [p.strip() for p in raw_value.split(",") if p.strip()]
            elif isinstance(raw_value, Iterable):
                parts = [str(p) for p in raw_value]
            else:
                raise ModelError("label_predicates must be a comma-separated list")
            kwargs["label_predicates"] = tuple(parts)
        elif key.startswith("llm_backend."):
            sub = key.split(".", 1)[1]
            if sub not in _BACKEND_FIELD_KEYS:
                raise ModelError(f"unknown config key: {raw_key!r}")
            backend_kwargs[sub] = _coerce(raw_value, _BACKEND_FIELD_KEYS[sub], key)
        elif key in _CONFIG_FIELD_KEYS:
            kwargs[key] = _coerce(raw_value, _CONFIG_FIELD_KEYS[key], key)
        else:
            raise ModelError(f"unknown config key: {raw_key!r}")
    if backend_kwargs:
        kwargs["llm_backend"] = replace(base.llm_backend, **backend_kwargs)
    return replace(base, **kwargs)


def config_from_mapping(data: Mapping[str, object], base: Optional[EngineConfig] = None) -> EngineConfig:
    """Validate a flat mapping of overrides (``llm_backend.*`` keys reach the
    backend descriptor) against :class:`EngineConfig` invariants."""
    return _config_from_mapping(data, base=base)


def load_config_file(path: str, base: Optional[EngineConfig] = None) -> EngineConfig:
    """Parse a flat ``key = value`` config file ('#' starts a comment)."""
    data: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ModelError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            # '#' only starts a comment after whitespace; IRIs carry bare '#'.
            comment = re.search(r"\s#", value)
            if comment:
                value = value[: comment.start()]
            data[key.strip()] = value.strip()
    return _config_from_mapping(data, base=base)
