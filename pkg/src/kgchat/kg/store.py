"""Embedded triple store: N-Triples loading and exact evaluation of the
emitted SPARQL subset (basic graph pattern join, CONTAINS filters, ordering,
limit, DISTINCT, COUNT, ASK). Immutable after construction."""

from __future__ import annotations

import re
from typing import Iterable, Optional

from kgchat.kg.terms import (
    ContainsFilter,
    Iri,
    KgError,
    Literal,
    Pattern,
    ResultSet,
    SparqlQuery,
    Term,
    Var,
    term_sort_key,
)

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

Triple = tuple[Iri, Iri, Term]

_IRI_TOKEN = re.compile(r"<([^<>\s]*)>")

_ESCAPES = {
    '"': '"',
    "\\": "\\",
    "n": "\n",
    "t": "\t",
    "r": "\r",
}


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(text):
            raise KgError("dangling escape in literal")
        nxt = text[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        elif nxt == "u" and i + 6 <= len(text):
            out.append(chr(int(text[i + 2 : i + 6], 16)))
            i += 6
        else:
            raise KgError(f"unsupported escape: \\{nxt}")
    return "".join(out)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")


def format_term(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, Var):
        return term.name
    rendered = f'"{_escape(term.value)}"'
    if term.datatype:
        rendered += f"^^<{term.datatype}>"
    return rendered


def _parse_object(text: str, where: str) -> tuple[Term, str]:
    text = text.lstrip()
    if text.startswith("<"):
        match = _IRI_TOKEN.match(text)
        if not match:
            raise KgError(f"{where}: malformed IRI")
        return Iri(match.group(1)), text[match.end() :]
    if not text.startswith('"'):
        raise KgError(f"{where}: object must be an IRI or a quoted literal")
    i = 1
    while i < len(text):
        if text[i] == "\\":
            i += 2
            continue
        if text[i] == '"':
            break
        i += 1
    else:
        raise KgError(f"{where}: unterminated literal")
    value = _unescape(text[1:i])
    rest = text[i + 1 :]
    datatype = None
    if rest.startswith("^^"):
        match = _IRI_TOKEN.match(rest[2:])
        if not match:
            raise KgError(f"{where}: malformed datatype IRI")
        datatype = match.group(1)
        rest = rest[2 + match.end() :]
    elif rest.startswith("@"):
        match = re.match(r"@[A-Za-z0-9-]+", rest)
        if not match:
            raise KgError(f"{where}: malformed language tag")
        rest = rest[match.end() :]
    return Literal(value, datatype), rest


def parse_ntriples(text: str, source: str = "<string>") -> list[Triple]:
    """Parse N-Triples text, one `<s> <p> <o|"lit">` statement per line."""
    triples: list[Triple] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        subject_match = _IRI_TOKEN.match(line)
        if not subject_match:
            raise KgError(f"{where}: subject must be an IRI")
        rest = line[subject_match.end() :].lstrip()
        predicate_match = _IRI_TOKEN.match(rest)
        if not predicate_match:
            raise KgError(f"{where}: predicate must be an IRI")
        rest = rest[predicate_match.end() :]
        obj, rest = _parse_object(rest, where)
        if rest.strip() != ".":
            raise KgError(f"{where}: statement must end with '.'")
        triples.append((Iri(subject_match.group(1)), Iri(predicate_match.group(1)), obj))
    return triples


class TripleStore:
    """In-memory RDF graph with a label index for keyword vertex search."""

    def __init__(
        self,
        triples: Iterable[Triple],
        label_predicates: tuple[str, ...] = (RDFS_LABEL,),
    ):
        unique = set(triples)
        self.triples: tuple[Triple, ...] = tuple(
            sorted(unique, key=lambda t: (t[0].value, t[1].value, term_sort_key(t[2])))
        )
        self.label_predicates = tuple(label_predicates)
        self.label_index: dict[str, list[str]] = {}
        label_set = set(self.label_predicates)
        for subject, predicate, obj in self.triples:
            if predicate.value in label_set and isinstance(obj, Literal):
                self.label_index.setdefault(subject.value, []).append(obj.value)

    def __len__(self) -> int:
        return len(self.triples)

    @classmethod
    def from_file(cls, path: str, label_predicates: tuple[str, ...] = (RDFS_LABEL,)) -> "TripleStore":
        with open(path, "r", encoding="utf-8") as handle:
            return cls(parse_ntriples(handle.read(), source=path), label_predicates)

    def labels_of(self, iri: str) -> list[str]:
        return list(self.label_index.get(iri, []))

    # -- evaluation ---------------------------------------------------------

    def execute(self, query: SparqlQuery) -> ResultSet:
        bindings = self._join(query.patterns)
        bindings = [b for b in bindings if _passes_filters(b, query.filters)]
        if query.form == "ASK":
            return ResultSet(kind="boolean", boolean=bool(bindings))
        if query.form == "SELECT_COUNT":
            counted = query.projection[0].name
            values = {
                _term_key(b[counted]) for b in bindings if b.get(counted) is not None
            }
            return ResultSet(kind="count", count=len(values))
        rows = [
            {v.name: b[v.name] for v in query.projection if v.name in b} for b in bindings
        ]
        if query.distinct:
            rows = _dedupe_rows(rows)
        if query.order_by:
            rows.sort(
                key=lambda row: tuple(
                    term_sort_key(row[v.name]) if v.name in row else (9, "", "")
                    for v in query.order_by
                )
            )
        if query.limit is not None:
            rows = rows[: query.limit]
        return ResultSet(kind="rows", rows=tuple(rows))

    def _join(self, patterns: tuple[Pattern, ...]) -> list[dict[str, Term]]:
        bindings: list[dict[str, Term]] = [{}]
        for pattern in patterns:
            extended: list[dict[str, Term]] = []
            for binding in bindings:
                for triple in self.triples:
                    grown = _match_pattern(pattern, triple, binding)
                    if grown is not None:
                        extended.append(grown)
            bindings = extended
            if not bindings:
                break
        return bindings


def _match_pattern(pattern: Pattern, triple: Triple, binding: dict[str, Term]) -> Optional[dict[str, Term]]:
    grown = binding
    for pattern_term, value in zip(pattern, triple):
        if isinstance(pattern_term, Var):
            bound = grown.get(pattern_term.name)
            if bound is None:
                if grown is binding:
                    grown = dict(binding)
                grown[pattern_term.name] = value
            elif bound != value:
                return None
        elif pattern_term != value:
            return None
    return dict(grown) if grown is binding else grown


def _passes_filters(binding: dict[str, Term], filters: tuple[ContainsFilter, ...]) -> bool:
    for constraint in filters:
        term = binding.get(constraint.var.name)
        if term is None or isinstance(term, Var):
            return False
        if constraint.token.lower() not in str(term).lower():
            return False
    return True


def _term_key(term: Term) -> tuple:
    return term_sort_key(term)


def _dedupe_rows(rows: list[dict[str, Term]]) -> list[dict[str, Term]]:
    seen = set()
    out = []
    for row in rows:
        key = tuple(sorted((name, term_sort_key(term)) for name, term in row.items()))
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def load_ntriples(path: str) -> list[Triple]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_ntriples(handle.read(), source=path)
