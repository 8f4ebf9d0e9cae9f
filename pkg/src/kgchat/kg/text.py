"""SPARQL text for the emitted subset: deterministic serialization plus a
parser, so queries survive a round trip through their textual form."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from kgchat.kg.terms import (
    ContainsFilter,
    Iri,
    KgError,
    Literal,
    Pattern,
    SparqlQuery,
    Term,
    Var,
)
from kgchat.kg.store import _escape, _unescape, format_term


def count_alias(var: Var) -> str:
    return f"{var.name}_count"


def serialize_query(query: SparqlQuery) -> str:
    lines = []
    if query.form == "ASK":
        lines.append("ASK WHERE {")
    elif query.form == "SELECT_COUNT":
        counted = query.projection[0]
        lines.append(
            f"SELECT (COUNT(DISTINCT {counted.name}) AS {count_alias(counted)}) WHERE {{"
        )
    else:
        head = "SELECT "
        if query.distinct:
            head += "DISTINCT "
        head += " ".join(v.name for v in query.projection)
        lines.append(head + " WHERE {")
    for subject, predicate, obj in query.patterns:
        lines.append(f"  {format_term(subject)} {format_term(predicate)} {format_term(obj)} .")
    for constraint in query.filters:
        lines.append(
            f'  FILTER(CONTAINS(LCASE(STR({constraint.var.name})), "{_escape(constraint.token)}"))'
        )
    lines.append("}")
    if query.order_by:
        lines.append("ORDER BY " + " ".join(v.name for v in query.order_by))
    if query.limit is not None:
        lines.append(f"LIMIT {query.limit}")
    return "\n".join(lines)


# -- parsing ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<iri><[^<>\s]*>)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<num>[0-9]+)
  | (?P<punct>[{}().,^])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise KgError(f"cannot tokenize query at offset {pos}: {text[pos:pos + 20]!r}")
        pos = match.end()
        kind = match.lastgroup or ""
        if kind == "ws":
            continue
        tokens.append(_Token(kind, match.group()))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        token = self.peek()
        if token is None:
            raise KgError("unexpected end of query")
        self.pos += 1
        return token

    def expect_word(self, *words: str) -> str:
        token = self.next()
        if token.kind not in ("word",) or token.text.upper() not in words:
            raise KgError(f"expected {'/'.join(words)}, got {token.text!r}")
        return token.text.upper()

    def expect_punct(self, char: str) -> None:
        token = self.next()
        if token.kind != "punct" or token.text != char:
            raise KgError(f"expected {char!r}, got {token.text!r}")

    def at_word(self, word: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "word" and token.text.upper() == word

    def term(self) -> Term:
        token = self.next()
        if token.kind == "iri":
            return Iri(token.text[1:-1])
        if token.kind == "var":
            return Var(token.text)
        if token.kind == "string":
            value = _unescape(token.text[1:-1])
            datatype = None
            nxt = self.peek()
            if nxt is not None and nxt.kind == "punct" and nxt.text == "^":
                self.expect_punct("^")
                self.expect_punct("^")
                iri_token = self.next()
                if iri_token.kind != "iri":
                    raise KgError("expected datatype IRI after '^^'")
                datatype = iri_token.text[1:-1]
            return Literal(value, datatype)
        raise KgError(f"expected a term, got {token.text!r}")

    def var(self) -> Var:
        token = self.next()
        if token.kind != "var":
            raise KgError(f"expected a variable, got {token.text!r}")
        return Var(token.text)


def parse_query(text: str) -> SparqlQuery:
    """Parse SPARQL text produced by :func:`serialize_query` (and trivial
    formatting variations of it) back into a :class:`SparqlQuery`."""
    parser = _Parser(_tokenize(text))
    head = parser.expect_word("SELECT", "ASK")
    form = "ASK"
    distinct = False
    projection: tuple[Var, ...] = ()
    if head == "SELECT":
        if parser.at_word("DISTINCT"):
            parser.next()
            distinct = True
        token = parser.peek()
        if token is not None and token.kind == "punct" and token.text == "(":
            parser.expect_punct("(")
            parser.expect_word("COUNT")
            parser.expect_punct("(")
            count_distinct = False
            if parser.at_word("DISTINCT"):
                parser.next()
                count_distinct = True
            counted = parser.var()
            parser.expect_punct(")")
            parser.expect_word("AS")
            parser.var()
            parser.expect_punct(")")
            if not count_distinct:
                raise KgError("COUNT in this subset is always DISTINCT")
            form = "SELECT_COUNT"
            projection = (counted,)
        else:
            form = "SELECT"
            variables = []
            while True:
                token = parser.peek()
                if token is None or token.kind != "var":
                    break
                variables.append(parser.var())
            projection = tuple(variables)
    parser.expect_word("WHERE")
    parser.expect_punct("{")
    patterns: list[Pattern] = []
    filters: list[ContainsFilter] = []
    while True:
        token = parser.peek()
        if token is None:
            raise KgError("unterminated group pattern")
        if token.kind == "punct" and token.text == "}":
            parser.next()
            break
        if token.kind == "word" and token.text.upper() == "FILTER":
            parser.next()
            parser.expect_punct("(")
            parser.expect_word("CONTAINS")
            parser.expect_punct("(")
            parser.expect_word("LCASE")
            parser.expect_punct("(")
            parser.expect_word("STR")
            parser.expect_punct("(")
            filter_var = parser.var()
            parser.expect_punct(")")
            parser.expect_punct(")")
            parser.expect_punct(",")
            string_token = parser.next()
            if string_token.kind != "string":
                raise KgError("CONTAINS needs a string token")
            parser.expect_punct(")")
            parser.expect_punct(")")
            filters.append(ContainsFilter(filter_var, _unescape(string_token.text[1:-1])))
            continue
        subject = parser.term()
        predicate = parser.term()
        obj = parser.term()
        parser.expect_punct(".")
        patterns.append((subject, predicate, obj))
    order_by: tuple[Var, ...] = ()
    limit = None
    while parser.peek() is not None:
        token = parser.next()
        if token.kind == "word" and token.text.upper() == "ORDER":
            parser.expect_word("BY")
            variables = []
            while True:
                nxt = parser.peek()
                if nxt is None or nxt.kind != "var":
                    break
                variables.append(parser.var())
            order_by = tuple(variables)
        elif token.kind == "word" and token.text.upper() == "LIMIT":
            number = parser.next()
            if number.kind != "num":
                raise KgError("LIMIT needs an integer")
            limit = int(number.text)
        else:
            raise KgError(f"unexpected trailing token: {token.text!r}")
    return SparqlQuery(
        form=form,
        patterns=tuple(patterns),
        filters=tuple(filters),
        projection=projection,
        limit=limit,
        distinct=distinct,
        order_by=order_by,
    )
