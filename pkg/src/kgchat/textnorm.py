"""Small text utilities shared by understanding and matching: stopwords,
phrase tokenization, and predicate-IRI labelling."""

from __future__ import annotations

import re

STOPWORDS = frozenset(
    """
    a an the of in on at to for by with from as is are was were be been being
    has have had do does did it its his her their this that these those and or
    """.split()
)

_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)

_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def tokenize_phrase(phrase: str, drop_stopwords: bool = True) -> list[str]:
    """Lowercased word tokens with punctuation stripped; stopwords dropped
    by default (long titles keep all their content words)."""
    cleaned = _PUNCT_RE.sub(" ", phrase.lower())
    tokens = cleaned.split()
    if drop_stopwords:
        kept = [t for t in tokens if t not in STOPWORDS]
        return kept
    return tokens


def is_generic_phrase(phrase: str) -> bool:
    """True when a relation phrase carries no content words ("has", "is of")."""
    return not tokenize_phrase(phrase, drop_stopwords=True)


def predicate_label(iri: str) -> str:
    """Human-readable label for a predicate IRI: final path segment with
    camelCase and underscores split, lowercased ("…/foundedBy" -> "founded by")."""
    segment = re.split(r"[/#]", iri.rstrip("/#"))[-1]
    segment = segment.replace("_", " ").replace("-", " ")
    segment = _CAMEL_RE.sub(" ", segment)
    return " ".join(segment.lower().split())
