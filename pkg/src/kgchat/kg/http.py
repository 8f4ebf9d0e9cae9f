"""SPARQL 1.1 protocol client: form-encoded POST, JSON results parsing."""

from __future__ import annotations

from typing import Optional

import requests

from kgchat.kg.terms import Iri, KgError, Literal, ResultSet, SparqlQuery, Term
from kgchat.kg.text import count_alias, serialize_query


class KgTransportError(KgError):
    """Network-level failure talking to the endpoint."""


class KgQueryError(KgError):
    """The endpoint rejected the query or returned an unusable body."""


def _binding_term(entry: dict) -> Term:
    kind = entry.get("type")
    value = entry.get("value", "")
    if kind == "literal" or kind == "typed-literal":
        return Literal(value, entry.get("datatype"))
    # IRIs and blank node ids are both graph nodes for our purposes.
    return Iri(value)


class SparqlEndpoint:
    """HTTP SPARQL endpoint speaking the standard query protocol."""

    def __init__(self, url: str, timeout: float = 60.0, session: Optional[requests.Session] = None):
        if not url:
            raise KgError("endpoint URL required")
        self.url = url
        self.timeout = timeout
        self.session = session or requests.Session()

    def execute(self, query: SparqlQuery) -> ResultSet:
        text = serialize_query(query)
        try:
            response = self.session.post(
                self.url,
                data={"query": text},
                headers={"Accept": "application/sparql-results+json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise KgTransportError(f"endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise KgQueryError(
                f"endpoint rejected query ({response.status_code}): {response.text[:300]}"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise KgQueryError(f"malformed results body: {exc}") from exc
        return self._parse_results(query, body)

    def _parse_results(self, query: SparqlQuery, body: dict) -> ResultSet:
        if query.form == "ASK":
            if "boolean" not in body:
                raise KgQueryError("ASK response missing 'boolean'")
            return ResultSet(kind="boolean", boolean=bool(body["boolean"]))
        try:
            bindings = body["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise KgQueryError("SELECT response missing results.bindings") from exc
        if query.form == "SELECT_COUNT":
            alias = count_alias(query.projection[0]).lstrip("?")
            if not bindings:
                return ResultSet(kind="count", count=0)
            entry = bindings[0].get(alias)
            if entry is None:
                raise KgQueryError(f"COUNT response missing variable {alias!r}")
            try:
                return ResultSet(kind="count", count=int(entry["value"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise KgQueryError(f"unparseable COUNT value: {exc}") from exc
        rows = []
        for binding in bindings:
            row: dict[str, Term] = {}
            for name, entry in binding.items():
                row[f"?{name}"] = _binding_term(entry)
            rows.append(row)
        if query.limit is not None:
            rows = rows[: query.limit]
        return ResultSet(kind="rows", rows=tuple(rows))
