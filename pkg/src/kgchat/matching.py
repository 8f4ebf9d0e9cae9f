"""Grounding the QIR in the graph: each entity phrase is resolved to exactly
one KG vertex (keyword retrieval, LLM selection, validation), and each
relational fact's phrase is mapped to a ranked list of candidate predicates
by embedding similarity against the predicate labels.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
import requests

from kgchat.errors import PipelineError
from kgchat.kg.access import keyword_vertex_search, predicates_between
from kgchat.kg.terms import Iri
from kgchat.llm import LlmRefusalError, LlmTransportError, PromptLibrary
from kgchat.model import EngineConfig, EntityRef, Fact, QIR
from kgchat.textnorm import predicate_label, tokenize_phrase

UNLINKED_RELATION_FLAG = "unlinked_relation"

VERTEX_FAILURES = ("malformed_json", "not_in_candidates")


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class TrigramEmbedder:
    """Deterministic offline embedder: character-trigram term frequencies
    hashed into a fixed-width vector. Identical strings embed identically,
    so exact label matches score cosine 1."""

    def __init__(self, dim: int = 512):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        padded = f"  {text.strip().lower()}  "
        vector = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3]
            vector[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
        return vector


class HttpEmbedder:
    """Neural text embedding over an OpenAI-compatible /embeddings endpoint."""

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: str = "KGCHAT_API_KEY",
        timeout: float = 60.0,
        session: Optional[requests.Session] = None,
    ):
        self.url = url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def embed(self, text: str) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        response = self.session.post(
            f"{self.url}/embeddings",
            json={"model": self.model, "input": [text]},
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        return np.asarray(response.json()["data"][0]["embedding"], dtype=np.float64)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if np.array_equal(a, b):
        return 1.0 if np.any(a) else 0.0
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.dot(a, b)) / norm


@dataclass
class LinkingMaps:
    """Outputs of the matching stage: one vertex per entity phrase, and a
    descending-similarity predicate list per relation phrase."""

    ent_to_vertex: dict[str, str] = field(default_factory=dict)
    rel_to_pred: dict[str, tuple[tuple[str, float], ...]] = field(default_factory=dict)


def render_candidates(candidates: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"- {label}" for _, label in candidates)


def validate_vertex(chosen: str, candidates: Sequence[tuple[str, str]]) -> str:
    """Total check of a vertex selection: parses as a JSON object and names a
    label from the candidate list. Returns the vertex IRI on success, else
    one of the failure tags 'malformed_json' / 'not_in_candidates'."""
    try:
        data = json.loads(chosen)
    except (ValueError, RecursionError, TypeError):
        return "malformed_json"
    if not isinstance(data, dict):
        return "malformed_json"
    label = data.get("label")
    if not isinstance(label, str):
        return "not_in_candidates"
    wanted = label.strip()
    for iri, candidate_label in candidates:
        if candidate_label == wanted:
            return iri
    return "not_in_candidates"


def select_vertex(
    entity: str,
    candidates: Sequence[tuple[str, str]],
    prompts: PromptLibrary,
    backend,
    theta: int,
) -> str:
    """LLM vertex selection over labels only, retried against the same
    candidate list up to theta times; every accepted vertex provably comes
    from the retrieved list."""
    if not candidates:
        raise PipelineError("linking", f"vertex selection failed for {entity!r}: no candidates")
    request = prompts.build_request(
        "vertex_select", entity=entity, candidates=render_candidates(candidates)
    )
    last_reason = "no attempt made"
    for _ in range(theta):
        try:
            response = backend.complete(request)
        except LlmTransportError as exc:
            last_reason = f"transport: {exc}"
            continue
        except LlmRefusalError as exc:
            raise PipelineError(
                "linking", f"vertex selection refused for {entity!r}: {exc}"
            ) from exc
        outcome = validate_vertex(response.raw_text, candidates)
        if outcome not in VERTEX_FAILURES:
            return outcome
        last_reason = outcome
    raise PipelineError(
        "linking",
        f"vertex selection failed for {entity!r} after {theta} attempts (last: {last_reason})",
    )


def _fact_endpoints(fact: Fact, ent_to_vertex: dict[str, str]) -> tuple[Optional[Iri], Optional[Iri]]:
    def resolve(term):
        if isinstance(term, EntityRef):
            return Iri(ent_to_vertex[term.phrase])
        return None

    return resolve(fact.subject), resolve(fact.object)


def link_relation(
    fact: Fact,
    ent_to_vertex: dict[str, str],
    embedder: Embedder,
    target,
    label_predicates: Sequence[str],
    cap: Optional[int] = None,
) -> list[tuple[str, float]]:
    """Candidate predicates for one fact, ranked by cosine similarity between
    the relation phrase and each predicate's label.

    With exactly one linked endpoint the linked vertex acts as the source
    (its outgoing predicates are retrieved, and query generation orients the
    pattern the same way); with both linked, predicates from subject to
    object are retrieved. Two unlinked endpoints yield an empty list and the
    turn is flagged degraded by the caller.
    """
    subject, obj = _fact_endpoints(fact, ent_to_vertex)
    if subject is None and obj is None:
        return []
    if subject is None or obj is None:
        source = subject if subject is not None else obj
        predicates = predicates_between(source, None, target, label_predicates)
    else:
        predicates = predicates_between(subject, obj, target, label_predicates)
    phrase_vector = embedder.embed(fact.relation)
    scored = [
        (iri, cosine(phrase_vector, embedder.embed(predicate_label(iri))))
        for iri in predicates
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    if cap is not None:
        scored = scored[:cap]
    return scored


def link(
    qir: QIR,
    config: EngineConfig,
    target,
    prompts: PromptLibrary,
    backend,
    embedder: Embedder,
    flags: Optional[set[str]] = None,
) -> LinkingMaps:
    """Ground all QIR entities first, then all relations, in QIR order.

    Any entity that cannot be linked aborts the turn naming the entity; a
    fact between two variables only degrades it.
    """
    maps = LinkingMaps()
    for entity in qir.entities:
        tokens = tokenize_phrase(entity)
        if not tokens:
            raise PipelineError("linking", f"entity {entity!r} has no searchable tokens")
        candidates = keyword_vertex_search(
            tokens, config.vertex_limit, target, config.label_predicates
        )
        if not candidates:
            raise PipelineError("linking", f"no vertex candidates for entity {entity!r}")
        maps.ent_to_vertex[entity] = select_vertex(
            entity, candidates, prompts, backend, config.theta
        )
    for fact in qir.facts:
        subject, obj = _fact_endpoints(fact, maps.ent_to_vertex)
        if subject is None and obj is None and flags is not None:
            flags.add(UNLINKED_RELATION_FLAG)
        ranked = link_relation(
            fact,
            maps.ent_to_vertex,
            embedder,
            target,
            config.label_predicates,
            cap=config.predicate_candidate_cap,
        )
        maps.rel_to_pred[fact.relation] = tuple(ranked)
    return maps
