from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from kgchat.kg.access import keyword_vertex_search, predicates_between
from kgchat.kg.terms import Iri, KgError

E = "http://desk.example/e/"
P = "http://desk.example/p/"


class TestKeywordVertexSearch:
    def test_harry_potter_finds_book_and_films(self, desk_store):
        results = keyword_vertex_search(["harry", "potter"], 600, desk_store)
        iris = [iri for iri, _ in results]
        assert iris == [
            f"{E}Harry_Potter",
            f"{E}Chamber_of_Secrets_film",
            f"{E}Philosophers_Stone_film",
            f"{E}Prisoner_of_Azkaban_film",
        ]

    def test_intel_company_and_chip(self, desk_store):
        results = keyword_vertex_search(["intel"], 600, desk_store)
        assert [iri for iri, _ in results] == [f"{E}Intel", f"{E}Intel_4004"]

    def test_limit_keeps_lexicographically_first(self, desk_store):
        results = keyword_vertex_search(["harry", "potter"], 1, desk_store)
        assert results == [(f"{E}Harry_Potter", "Harry Potter")]

    def test_conjunctive_semantics(self, desk_store):
        # "chamber" + "potter" only matches the one film carrying both words.
        results = keyword_vertex_search(["potter", "chamber"], 600, desk_store)
        assert [iri for iri, _ in results] == [f"{E}Chamber_of_Secrets_film"]

    def test_token_order_and_case_invariance(self, desk_store):
        base = keyword_vertex_search(["harry", "potter"], 600, desk_store)
        assert keyword_vertex_search(["potter", "harry"], 600, desk_store) == base
        assert keyword_vertex_search(["HARRY", "Potter"], 600, desk_store) == base

    @given(
        st.permutations(["relay", "channel"]),
        st.sampled_from(["lower", "upper", "title"]),
    )
    def test_invariance_property(self, desk_store, tokens, case):
        styled = [getattr(t, case)() for t in tokens]
        got = keyword_vertex_search(styled, 10, desk_store)
        assert got == keyword_vertex_search(["relay", "channel"], 10, desk_store)

    def test_empty_tokens_rejected(self, desk_store):
        with pytest.raises(KgError):
            keyword_vertex_search([], 10, desk_store)
        with pytest.raises(KgError):
            keyword_vertex_search(["  "], 10, desk_store)

    def test_results_never_exceed_limit(self, desk_store):
        for limit in (1, 2, 3, 600):
            assert len(keyword_vertex_search(["harry", "potter"], limit, desk_store)) <= limit


class TestPredicatesBetween:
    def test_intel_outgoing_excludes_labels(self, desk_store):
        predicates = predicates_between(Iri(f"{E}Intel"), None, desk_store)
        assert set(predicates) == {
            f"{P}founders",
            f"{P}founder",
            f"{P}foundedBy",
            f"{P}location",
        }

    def test_bound_pair_finds_spouse(self, desk_store):
        predicates = predicates_between(
            Iri(f"{E}Michelle_Obama"), Iri(f"{E}Barack_Obama"), desk_store
        )
        assert predicates == [f"{P}spouse"]

    def test_incoming_only_object_bound(self, desk_store):
        predicates = predicates_between(None, Iri(f"{E}Intel"), desk_store)
        assert predicates == [f"{P}madeBy"]

    def test_both_unbound_is_an_error(self, desk_store):
        with pytest.raises(KgError, match="unlinked relation"):
            predicates_between(None, None, desk_store)

    def test_distinct_despite_multiple_triples(self, desk_store):
        # founders appears twice (two founders) but is reported once.
        predicates = predicates_between(Iri(f"{E}Intel"), None, desk_store)
        assert len(predicates) == len(set(predicates))
