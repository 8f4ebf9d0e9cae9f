"""Query-shaped operations shared by the embedded store and HTTP endpoints."""

from __future__ import annotations

from typing import Optional, Protocol, Sequence, Union

from kgchat.kg.terms import (
    ContainsFilter,
    Iri,
    KgError,
    Literal,
    ResultSet,
    SparqlQuery,
    Var,
)

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"


class QueryTarget(Protocol):
    def execute(self, query: SparqlQuery) -> ResultSet: ...


def execute(query: SparqlQuery, target: QueryTarget) -> ResultSet:
    return target.execute(query)


def keyword_vertex_search(
    tokens: Sequence[str],
    limit: int,
    target: QueryTarget,
    label_predicates: Sequence[str] = (RDFS_LABEL,),
) -> list[tuple[str, str]]:
    """Vertices whose label contains every token, case-insensitively.

    Returns (vertex IRI, label) pairs in deterministic order: label
    lexicographic, then IRI, capped at ``limit``.
    """
    clean = [t for t in tokens if t.strip()]
    if not clean:
        raise KgError("keyword search requires at least one non-empty token")
    if limit < 1:
        raise KgError("keyword search limit must be >= 1")
    vertex, label = Var("?v"), Var("?label")
    merged: set[tuple[str, str]] = set()
    for predicate in label_predicates:
        query = SparqlQuery(
            form="SELECT",
            patterns=((vertex, Iri(predicate), label),),
            filters=tuple(ContainsFilter(label, token) for token in clean),
            projection=(label, vertex),
            distinct=True,
            order_by=(label, vertex),
            limit=limit,
        )
        result = target.execute(query)
        for row in result.rows:
            vertex_term = row.get("?v")
            label_term = row.get("?label")
            if isinstance(vertex_term, Iri) and label_term is not None:
                merged.add((vertex_term.value, str(label_term)))
    ranked = sorted(merged, key=lambda pair: (pair[1], pair[0]))
    return ranked[:limit]


def predicates_between(
    source: Optional[Iri],
    obj: Optional[Union[Iri, Literal]],
    target: QueryTarget,
    label_predicates: Sequence[str] = (RDFS_LABEL,),
) -> list[str]:
    """Distinct predicate IRIs on triples matching the (possibly half-bound)
    pattern; label predicates are vertex metadata, not domain relations, and
    are excluded. Requires at least one bound endpoint."""
    if source is None and obj is None:
        raise KgError("unlinked relation: both endpoints are unbound")
    pred = Var("?p")
    subject_term = source if source is not None else Var("?s")
    object_term = obj if obj is not None else Var("?o")
    query = SparqlQuery(
        form="SELECT",
        patterns=((subject_term, pred, object_term),),
        projection=(pred,),
        distinct=True,
    )
    result = target.execute(query)
    found = {
        row["?p"].value
        for row in result.rows
        if isinstance(row.get("?p"), Iri)
    }
    return sorted(found - set(label_predicates))
