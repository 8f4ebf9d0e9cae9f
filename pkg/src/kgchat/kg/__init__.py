"""Knowledge-graph I/O: an embedded triple store for desk-scale work plus a
SPARQL-protocol HTTP client, behind one ``execute(query)`` interface."""

from kgchat.kg.terms import Iri, KgError, Literal, ResultSet, SparqlQuery, Var
from kgchat.kg.store import TripleStore, load_ntriples, parse_ntriples
from kgchat.kg.text import parse_query, serialize_query
from kgchat.kg.http import KgQueryError, KgTransportError, SparqlEndpoint
from kgchat.kg.access import execute, keyword_vertex_search, predicates_between

__all__ = [
    "Iri",
    "KgError",
    "KgQueryError",
    "KgTransportError",
    "Literal",
    "ResultSet",
    "SparqlEndpoint",
    "SparqlQuery",
    "TripleStore",
    "Var",
    "execute",
    "keyword_vertex_search",
    "load_ntriples",
    "parse_ntriples",
    "parse_query",
    "serialize_query",
    "predicates_between",
]
