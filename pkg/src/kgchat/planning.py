"""Query planning: expand the QIR and linking maps into candidate SPARQL
queries (one per predicate configuration), truncate to a budget, prune the
global predicate list with one validated LLM call, execute only the
surviving queries, and aggregate their bindings into answers.

An empty final result is returned as-is: the engine never substitutes a
generated answer for a missing one.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from kgchat.errors import PipelineError
from kgchat.kg.terms import Iri, KgError, Literal, SparqlQuery, Term, Var
from kgchat.kg.text import serialize_query
from kgchat.llm import LlmRefusalError, LlmTransportError, PromptLibrary
from kgchat.matching import LinkingMaps
from kgchat.model import Answer, EngineConfig, EntityRef, QIR

FACT_SKIPPED_FLAG = "fact_skipped"
FILTER_FALLBACK_FLAG = "predicate_filter_fallback"
PARTIAL_EXECUTION_FLAG = "partial_execution"


@dataclass(frozen=True)
class CandidateQuery:
    """One executable predicate configuration of the QIR."""

    query: SparqlQuery
    predicate_set: frozenset[str]
    rank_cost: int
    origin: tuple[tuple[int, str], ...]  # (fact index, chosen predicate IRI)

    def origin_key(self) -> tuple[str, ...]:
        return tuple(iri for _, iri in sorted(self.origin))


@dataclass
class PredicateIndex:
    """All predicates over the candidate set (first-seen order) plus the
    inverted predicate-to-query index."""

    all_predicates: list[str] = field(default_factory=list)
    pred_to_query: dict[str, set[int]] = field(default_factory=dict)


@dataclass
class TurnTrace:
    """Per-turn planning record for debugging and the UI's explain panel."""

    question: str = ""
    qir: Optional[dict] = None
    linking: Optional[dict] = None
    candidates: list[dict] = field(default_factory=list)
    all_predicates: list[str] = field(default_factory=list)
    kept_predicates: list[str] = field(default_factory=list)
    executed: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "question": self.question,
            "qir": self.qir,
            "linking": self.linking,
            "candidates": self.candidates,
            "all_predicates": self.all_predicates,
            "kept_predicates": self.kept_predicates,
            "executed": self.executed,
        }


def _fact_terms(fact, maps: LinkingMaps) -> tuple[Term, Term]:
    """Pattern endpoints for a fact, oriented the way relation linking
    retrieved the predicates: with one linked endpoint the linked vertex is
    the pattern subject, with both linked the fact's own direction holds."""
    def resolve(term) -> Term:
        if isinstance(term, EntityRef):
            return Iri(maps.ent_to_vertex[term.phrase])
        return Var(term.name)

    subject, obj = resolve(fact.subject), resolve(fact.object)
    if isinstance(subject, Var) and isinstance(obj, Iri):
        return obj, subject
    return subject, obj


def generate(qir: QIR, maps: LinkingMaps) -> tuple[list[CandidateQuery], set[str]]:
    """Cartesian expansion over each fact's ranked predicate options.

    Facts without a single predicate option are skipped with a degraded
    flag; if nothing remains there is no executable query and the turn
    fails. Returns the candidates plus any degraded flags raised.
    """
    flags: set[str] = set()
    usable: list[tuple[int, tuple[Term, Term], tuple[str, ...]]] = []
    for index, fact in enumerate(qir.facts):
        options = tuple(iri for iri, _ in maps.rel_to_pred.get(fact.relation, ()))
        if not options:
            flags.add(FACT_SKIPPED_FLAG)
            continue
        usable.append((index, _fact_terms(fact, maps), options))
    if not usable:
        raise PipelineError("selection", "no executable facts")

    form = {"list": "SELECT", "count": "SELECT_COUNT", "boolean": "ASK"}[qir.form]
    projection: tuple[Var, ...] = ()
    if form != "ASK":
        projection = (Var(qir.target_variable),)
        remaining_vars = {
            term.name
            for _, terms, _ in usable
            for term in terms
            if isinstance(term, Var)
        }
        if qir.target_variable not in remaining_vars:
            raise PipelineError(
                "selection", "answer variable unreachable: its facts were all skipped"
            )

    candidates: list[CandidateQuery] = []
    option_lists = [options for _, _, options in usable]
    for combo in itertools.product(*option_lists):
        patterns = []
        origin = []
        rank_cost = 0
        for (fact_index, (subject, obj), options), chosen in zip(usable, combo):
            patterns.append((subject, Iri(chosen), obj))
            origin.append((fact_index, chosen))
            rank_cost += options.index(chosen)
        query = SparqlQuery(form=form, patterns=tuple(patterns), projection=projection)
        candidates.append(
            CandidateQuery(
                query=query,
                predicate_set=frozenset(combo),
                rank_cost=rank_cost,
                origin=tuple(origin),
            )
        )
    return candidates, flags


def truncate(candidates: Sequence[CandidateQuery], query_num: int) -> list[CandidateQuery]:
    """Keep the query_num cheapest candidates (sum of per-fact predicate
    rank indices), breaking ties on the origin predicates, so the
    top-ranked configurations always survive the cut."""
    ordered = sorted(candidates, key=lambda c: (c.rank_cost, c.origin_key()))
    return ordered[:query_num]


def build_index(candidates: Sequence[CandidateQuery]) -> PredicateIndex:
    index = PredicateIndex()
    for position, candidate in enumerate(candidates):
        for predicate in sorted(candidate.predicate_set):
            if predicate not in index.pred_to_query:
                index.all_predicates.append(predicate)
                index.pred_to_query[predicate] = set()
            index.pred_to_query[predicate].add(position)
    return index


def validate_predicate_choice(raw: str, available: Sequence[str]) -> Optional[list[str]]:
    """Total validation of the LLM's predicate subset: JSON object with a
    "predicates" list; unknown entries are dropped; empty after dropping is
    invalid. Returns the kept predicates in candidate-list order, or None."""
    try:
        data = json.loads(raw)
    except (ValueError, RecursionError, TypeError):
        return None
    if isinstance(data, dict):
        chosen = data.get("predicates")
    elif isinstance(data, list):
        chosen = data
    else:
        return None
    if not isinstance(chosen, list):
        return None
    requested = {item.strip() for item in chosen if isinstance(item, str)}
    kept = [iri for iri in available if iri in requested]
    return kept or None


def filter_predicates(
    question: str,
    index: PredicateIndex,
    prompts: PromptLibrary,
    backend,
    theta: int,
) -> tuple[list[str], set[str]]:
    """LLM pruning of the global predicate list, retried up to theta times;
    exhaustion falls back to executing everything (bounded by the earlier
    truncation) rather than aborting the turn."""
    if not index.all_predicates:
        raise PipelineError("selection", "no predicates to filter")
    request = prompts.build_request(
        "predicate_select", question=question, predicates="\n".join(index.all_predicates)
    )
    for _ in range(theta):
        try:
            response = backend.complete(request)
        except LlmTransportError:
            continue
        except LlmRefusalError:
            break
        kept = validate_predicate_choice(response.raw_text, index.all_predicates)
        if kept is not None:
            return kept, set()
    return list(index.all_predicates), {FILTER_FALLBACK_FLAG}


def _term_answer(term: Term, labeller=None) -> Answer:
    if isinstance(term, Iri):
        label = None
        if labeller is not None:
            labels = labeller(term.value)
            label = labels[0] if labels else None
        return Answer(kind="entity", value=term.value, display_label=label)
    if isinstance(term, Literal):
        return Answer(kind="literal", value=term.value)
    raise PipelineError("execution", f"unbound term in result row: {term}")


def plan_and_execute(
    question: str,
    qir: QIR,
    maps: LinkingMaps,
    config: EngineConfig,
    target,
    prompts: PromptLibrary,
    backend,
    trace: Optional[TurnTrace] = None,
) -> tuple[list[Answer], set[str], int]:
    """Run the full planning stage; returns (answers, degraded flags,
    executed-query count). Queries execute in truncated-list order and their
    bindings are deduplicated first-seen, so answer order is deterministic."""
    candidates, flags = generate(qir, maps)
    kept_candidates = truncate(candidates, config.query_num)
    index = build_index(kept_candidates)
    chosen, filter_flags = filter_predicates(question, index, prompts, backend, config.theta)
    flags |= filter_flags
    chosen_set = set(chosen)
    selected = [c for c in kept_candidates if c.predicate_set & chosen_set]

    if trace is not None:
        trace.question = question
        trace.candidates = [
            {
                "sparql": serialize_query(c.query),
                "predicates": sorted(c.predicate_set),
                "rank_cost": c.rank_cost,
                "selected": c.predicate_set & chosen_set != set(),
            }
            for c in kept_candidates
        ]
        trace.all_predicates = list(index.all_predicates)
        trace.kept_predicates = list(chosen)

    labeller = getattr(target, "labels_of", None)
    answers: list[Answer] = []
    seen: set[tuple[str, str]] = set()
    ask_results: list[bool] = []
    executed = 0
    failures = 0
    for candidate in selected:
        try:
            result = target.execute(candidate.query)
        except KgError as exc:
            failures += 1
            if trace is not None:
                trace.executed.append(
                    {"sparql": serialize_query(candidate.query), "error": str(exc)}
                )
            continue
        executed += 1
        row_values: list[str] = []
        if result.kind == "boolean":
            ask_results.append(bool(result.boolean))
            row_values.append(str(result.boolean).lower())
        elif result.kind == "count":
            answer = Answer(kind="count", value=str(result.count))
            row_values.append(answer.value)
            if ("count", answer.value) not in seen:
                seen.add(("count", answer.value))
                answers.append(answer)
        else:
            for row in result.rows:
                term = row.get(qir.target_variable or "")
                if term is None:
                    continue
                answer = _term_answer(term, labeller)
                row_values.append(answer.value)
                key = (answer.kind, answer.value)
                if key not in seen:
                    seen.add(key)
                    answers.append(answer)
        if trace is not None:
            trace.executed.append(
                {"sparql": serialize_query(candidate.query), "results": row_values}
            )

    if failures and executed:
        flags.add(PARTIAL_EXECUTION_FLAG)
    if failures and not executed:
        raise PipelineError("execution", f"all {failures} selected queries failed")

    if qir.form == "boolean":
        # Any witnessing predicate configuration suffices, mirroring the
        # union semantics of SELECT aggregation.
        verdict = any(ask_results)
        answers = [Answer(kind="boolean", value="true" if verdict else "false")]

    return answers, flags, executed
