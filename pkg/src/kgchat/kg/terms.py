"""RDF terms, the SPARQL query subset this system emits, and result sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union


class KgError(Exception):
    """Base class for knowledge-graph access failures."""


@dataclass(frozen=True)
class Iri:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    value: str
    datatype: Optional[str] = None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Var:
    """A query variable in SPARQL surface syntax, e.g. "?year"."""

    name: str

    def __post_init__(self) -> None:
        if not self.name.startswith("?") or len(self.name) < 2:
            raise KgError(f"invalid variable: {self.name!r}")

    def __str__(self) -> str:
        return self.name


Term = Union[Iri, Literal, Var]

Pattern = tuple[Term, Term, Term]

QUERY_FORMS = ("SELECT", "ASK", "SELECT_COUNT")


def term_sort_key(term: Term) -> tuple[int, str, str]:
    if isinstance(term, Iri):
        return (0, term.value, "")
    if isinstance(term, Literal):
        return (1, term.value, term.datatype or "")
    return (2, term.name, "")


@dataclass(frozen=True)
class ContainsFilter:
    """Case-insensitive substring constraint on a variable's string form."""

    var: Var
    token: str


@dataclass(frozen=True)
class SparqlQuery:
    """The exact subset the generator emits: a basic graph pattern plus
    optional CONTAINS filters, ordering, and a row limit.

    SELECT projects at least one variable; ASK projects none; SELECT_COUNT
    counts the distinct bindings of exactly one variable.
    """

    form: str
    patterns: tuple[Pattern, ...]
    filters: tuple[ContainsFilter, ...] = ()
    projection: tuple[Var, ...] = ()
    limit: Optional[int] = None
    distinct: bool = False
    order_by: tuple[Var, ...] = ()

    def __post_init__(self) -> None:
        if self.form not in QUERY_FORMS:
            raise KgError(f"unknown query form: {self.form!r}")
        if not self.patterns:
            raise KgError("query requires at least one triple pattern")
        if self.form == "SELECT" and not self.projection:
            raise KgError("SELECT requires a non-empty projection")
        if self.form == "ASK" and self.projection:
            raise KgError("ASK must not project variables")
        if self.form == "SELECT_COUNT" and len(self.projection) != 1:
            raise KgError("SELECT_COUNT counts exactly one variable")
        if self.limit is not None and self.limit < 1:
            raise KgError("limit must be >= 1 when set")
        pattern_vars = self.pattern_variables()
        for var in self.projection + self.order_by + tuple(f.var for f in self.filters):
            if var.name not in pattern_vars:
                raise KgError(f"variable {var.name} does not occur in any pattern")

    def pattern_variables(self) -> set[str]:
        names = set()
        for pattern in self.patterns:
            for term in pattern:
                if isinstance(term, Var):
                    names.add(term.name)
        return names


@dataclass(frozen=True)
class ResultSet:
    """SELECT yields ordered rows of variable bindings, ASK a boolean,
    SELECT_COUNT a non-negative integer."""

    kind: str
    rows: tuple[dict[str, Term], ...] = ()
    boolean: Optional[bool] = None
    count: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("rows", "boolean", "count"):
            raise KgError(f"unknown result kind: {self.kind!r}")
