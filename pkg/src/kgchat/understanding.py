"""Contextual understanding: classify the question, rephrase it against the
dialogue context when it depends on earlier turns, extract relational facts
with a chain-of-thought prompt, validate them, and assemble the QIR.

LLM-call budget per question: one classifier call, at most one rephraser
call, and at most theta extraction attempts.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional, Union

from kgchat.errors import PipelineError
from kgchat.llm import LlmError, LlmRefusalError, LlmTransportError, PromptLibrary
from kgchat.model import EngineConfig, EntityRef, Fact, ModelError, QIR, QuestionContext, VarRef
from kgchat.textnorm import is_generic_phrase

FAILURE_REASONS = ("malformed_json", "empty_component", "no_known_entity", "no_variable")

REPHRASE_FALLBACK_FLAG = "rephrase_fallback"


class QuestionType(enum.Enum):
    SELF_CONTAINED = "Self-contained"
    DEPENDENT = "Dependent"


@dataclass(frozen=True)
class RawTripleOutput:
    """Unparsed extractor output; only validate_triples interprets it."""

    text: str


@dataclass(frozen=True)
class ValidationFailure:
    reason: str

    def __post_init__(self) -> None:
        if self.reason not in FAILURE_REASONS:
            raise ValueError(f"unknown validation failure reason: {self.reason!r}")


@dataclass(frozen=True)
class Understanding:
    qir: QIR
    standalone_question: str
    degraded_flags: frozenset[str] = frozenset()


def classify(question: str, prompts: PromptLibrary, backend) -> QuestionType:
    """Label the question Self-contained or Dependent (one LLM call; exact
    labels only after trimming and case-folding, so retries stay meaningful)."""
    if not question.strip():
        raise PipelineError("qu", "classification failed: empty question")
    request = prompts.build_request("classify", question=question)
    try:
        response = backend.complete(request)
    except LlmError as exc:
        raise PipelineError("qu", f"classification failed: {exc}") from exc
    label = response.raw_text.strip().casefold()
    if label == "self-contained":
        return QuestionType.SELF_CONTAINED
    if label == "dependent":
        return QuestionType.DEPENDENT
    raise PipelineError(
        "qu", f"classification failed: unrecognized label {response.raw_text.strip()[:60]!r}"
    )


def rephrase(
    question: str, context: QuestionContext, prompts: PromptLibrary, backend
) -> tuple[str, Optional[str]]:
    """Rewrite a context-dependent question into a standalone one.

    A failed or empty rewrite falls back to the original question with a
    degraded flag: a literal answer attempt beats aborting the turn.
    """
    request = prompts.build_request("rephrase", question=question, context=context.render())
    try:
        response = backend.complete(request)
    except LlmError:
        return question, REPHRASE_FALLBACK_FLAG
    rewritten = response.raw_text.strip()
    if not rewritten:
        return question, REPHRASE_FALLBACK_FLAG
    return rewritten, None


def extract_triples(standalone_question: str, prompts: PromptLibrary, backend) -> RawTripleOutput:
    """One extraction attempt; the raw text goes to validate_triples untouched."""
    request = prompts.build_request("extract", question=standalone_question)
    response = backend.complete(request)
    return RawTripleOutput(text=response.raw_text)


def _term_of(raw: object) -> Optional[object]:
    """Fact endpoint from a JSON value: "?x" style strings become variables,
    other non-empty strings entity phrases. None when invalid."""
    if not isinstance(raw, str):
        return None
    text = raw.strip()
    if not text:
        return None
    if text.startswith("?"):
        try:
            return VarRef(text)
        except ModelError:
            return None
    return EntityRef(text)


def _triple_parts(entry: object) -> Optional[tuple[object, object, object]]:
    if isinstance(entry, (list, tuple)) and len(entry) == 3:
        return entry[0], entry[1], entry[2]
    if isinstance(entry, dict):
        subject = entry.get("subject")
        relation = entry.get("relation", entry.get("predicate"))
        obj = entry.get("object")
        if subject is None and relation is None and obj is None:
            return None
        return subject, relation, obj
    return None


def validate_triples(raw: Union[RawTripleOutput, str]) -> Union[QIR, ValidationFailure]:
    """Total validation of extractor output.

    Accepts iff the text is a JSON object whose triples all have non-empty,
    non-generic components, at least one triple mentions a known entity, and
    non-boolean questions bind at least one variable. Returns the assembled
    QIR or exactly one failure reason.
    """
    text = raw.text if isinstance(raw, RawTripleOutput) else raw
    try:
        data = json.loads(text)
    except (ValueError, RecursionError, TypeError):
        return ValidationFailure("malformed_json")
    if not isinstance(data, dict):
        return ValidationFailure("malformed_json")

    raw_triples = data.get("triples")
    entries = raw_triples if isinstance(raw_triples, list) else []
    facts: list[Fact] = []
    for entry in entries:
        parts = _triple_parts(entry)
        if parts is None:
            return ValidationFailure("empty_component")
        subject, relation, obj = parts
        subject_term = _term_of(subject)
        object_term = _term_of(obj)
        relation_ok = isinstance(relation, str) and relation.strip() and not is_generic_phrase(relation)
        if subject_term is None or object_term is None or not relation_ok:
            return ValidationFailure("empty_component")
        facts.append(Fact(subject=subject_term, relation=relation.strip(), object=object_term))

    entities: list[str] = []
    variables: list[str] = []
    relations: list[str] = []
    for fact in facts:
        for term in fact.terms():
            if isinstance(term, EntityRef):
                if term.phrase not in entities:
                    entities.append(term.phrase)
            elif term.name not in variables:
                variables.append(term.name)
        if fact.relation not in relations:
            relations.append(fact.relation)

    if not entities:
        return ValidationFailure("no_known_entity")

    form_raw = data.get("form")
    form = form_raw.strip().lower() if isinstance(form_raw, str) else "list"
    if form not in ("list", "count", "boolean"):
        form = "list"

    if form != "boolean" and not variables:
        return ValidationFailure("no_variable")

    target = None
    if variables:
        declared = data.get("variables")
        if isinstance(declared, list):
            for candidate in declared:
                if isinstance(candidate, str) and candidate.strip() in variables:
                    target = candidate.strip()
                    break
        if target is None:
            target = variables[0]

    return QIR(
        entities=tuple(entities),
        variables=tuple(variables),
        relations=tuple(relations),
        facts=tuple(facts),
        form=form,
        target_variable=target,
    )


def extract_qir(standalone_question: str, theta: int, prompts: PromptLibrary, backend) -> QIR:
    """Extraction-and-validation loop, bounded by theta attempts; transport
    failures and validation rejections both consume an attempt."""
    last_reason = "no attempt made"
    for _ in range(theta):
        try:
            raw = extract_triples(standalone_question, prompts, backend)
        except LlmTransportError as exc:
            last_reason = f"transport: {exc}"
            continue
        except LlmRefusalError as exc:
            raise PipelineError("qu", f"triple extraction refused: {exc}") from exc
        outcome = validate_triples(raw)
        if isinstance(outcome, QIR):
            return outcome
        last_reason = outcome.reason
    raise PipelineError(
        "qu",
        f"triple extraction failed after {theta} attempts (last failure: {last_reason})",
    )


def understand(
    question: str,
    context: QuestionContext,
    config: EngineConfig,
    prompts: PromptLibrary,
    backend,
    assume_self_contained: bool = False,
) -> Understanding:
    """Full understanding pipeline: classify, rephrase when dependent, then
    extract and validate triples with at most ``config.theta`` attempts."""
    flags: set[str] = set()
    if assume_self_contained:
        question_type = QuestionType.SELF_CONTAINED
    else:
        question_type = classify(question, prompts, backend)
    if question_type is QuestionType.DEPENDENT:
        standalone, flag = rephrase(question, context, prompts, backend)
        if flag:
            flags.add(flag)
    else:
        standalone = question
    qir = extract_qir(standalone, config.theta, prompts, backend)
    return Understanding(qir=qir, standalone_question=standalone, degraded_flags=frozenset(flags))
