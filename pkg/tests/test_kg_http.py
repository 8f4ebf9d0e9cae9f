from __future__ import annotations

import pytest

from kgchat.kg.http import KgQueryError, KgTransportError, SparqlEndpoint
from kgchat.kg.terms import Iri, Literal, SparqlQuery, Var


class _FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class _FakeSession:
    def __init__(self, response=None, exc=None):
        self.response = response
        self.exc = exc
        self.last = None

    def post(self, url, **kwargs):
        self.last = {"url": url, **kwargs}
        if self.exc:
            raise self.exc
        return self.response


def _select_query():
    return SparqlQuery(
        form="SELECT",
        patterns=((Iri("http://e/Intel"), Var("?p"), Var("?o")),),
        projection=(Var("?p"), Var("?o")),
    )


class TestSparqlEndpoint:
    def test_posts_form_encoded_query_with_json_accept(self):
        session = _FakeSession(
            _FakeResponse(payload={"head": {"vars": []}, "results": {"bindings": []}})
        )
        endpoint = SparqlEndpoint("http://kg.local/sparql", session=session)
        endpoint.execute(_select_query())
        assert session.last["url"] == "http://kg.local/sparql"
        assert "query" in session.last["data"]
        assert session.last["data"]["query"].startswith("SELECT ?p ?o WHERE {")
        assert session.last["headers"]["Accept"] == "application/sparql-results+json"

    def test_parses_uri_and_literal_bindings(self):
        payload = {
            "results": {
                "bindings": [
                    {
                        "p": {"type": "uri", "value": "http://p/founders"},
                        "o": {
                            "type": "literal",
                            "value": "2001",
                            "datatype": "http://www.w3.org/2001/XMLSchema#integer",
                        },
                    }
                ]
            }
        }
        endpoint = SparqlEndpoint("http://kg.local/sparql", session=_FakeSession(_FakeResponse(payload=payload)))
        result = endpoint.execute(_select_query())
        row = result.rows[0]
        assert row["?p"] == Iri("http://p/founders")
        assert row["?o"] == Literal("2001", "http://www.w3.org/2001/XMLSchema#integer")

    def test_parses_ask_and_count(self):
        ask = SparqlQuery(
            form="ASK", patterns=((Iri("http://a"), Iri("http://p"), Iri("http://b")),)
        )
        endpoint = SparqlEndpoint(
            "http://kg.local/sparql", session=_FakeSession(_FakeResponse(payload={"boolean": True}))
        )
        assert endpoint.execute(ask).boolean is True

        count = SparqlQuery(
            form="SELECT_COUNT",
            patterns=((Iri("http://a"), Iri("http://p"), Var("?x")),),
            projection=(Var("?x"),),
        )
        payload = {"results": {"bindings": [{"x_count": {"type": "literal", "value": "7"}}]}}
        endpoint = SparqlEndpoint(
            "http://kg.local/sparql", session=_FakeSession(_FakeResponse(payload=payload))
        )
        assert endpoint.execute(count).count == 7

    def test_rejection_carries_endpoint_message(self):
        endpoint = SparqlEndpoint(
            "http://kg.local/sparql",
            session=_FakeSession(_FakeResponse(status_code=400, text="syntax error near WHERE")),
        )
        with pytest.raises(KgQueryError, match="syntax error"):
            endpoint.execute(_select_query())

    def test_transport_error(self):
        import requests

        endpoint = SparqlEndpoint(
            "http://kg.local/sparql", session=_FakeSession(exc=requests.ConnectionError("down"))
        )
        with pytest.raises(KgTransportError):
            endpoint.execute(_select_query())

    def test_malformed_body(self):
        endpoint = SparqlEndpoint(
            "http://kg.local/sparql", session=_FakeSession(_FakeResponse(payload=None))
        )
        with pytest.raises(KgQueryError):
            endpoint.execute(_select_query())
