from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, strategies as st

from kgchat import datafiles
from kgchat.errors import PipelineError
from kgchat.llm import ScriptedBackend, ScriptedRule
from kgchat.model import Dialogue, EngineConfig, QIR, QuestionContext, append_turn, build_context, Answer
from kgchat.understanding import (
    QuestionType,
    RawTripleOutput,
    ValidationFailure,
    classify,
    extract_qir,
    rephrase,
    understand,
    validate_triples,
)

HP_JSON = json.dumps(
    {
        "entities": ["Harry Potter"],
        "variables": ["?year"],
        "triples": [["Harry Potter", "released", "?year"]],
        "form": "list",
    }
)


class TestClassify:
    def test_self_contained(self, prompts, desk_backend):
        label = classify("Who is the author of Harry Potter?", prompts, desk_backend)
        assert label is QuestionType.SELF_CONTAINED

    def test_pronoun_dependent(self, prompts, desk_backend):
        label = classify("When was its first movie released?", prompts, desk_backend)
        assert label is QuestionType.DEPENDENT

    def test_complete_looking_but_dependent(self, prompts):
        # Subject named only in an earlier turn; the label decides the path.
        backend = ScriptedBackend(
            [ScriptedRule(task="classify", contains="the first movie", output="Dependent")]
        )
        label = classify("When was the first movie released?", prompts, backend)
        assert label is QuestionType.DEPENDENT

    def test_near_miss_labels_fail(self, prompts):
        backend = ScriptedBackend([ScriptedRule(task="classify", output="self contained!")])
        with pytest.raises(PipelineError) as exc_info:
            classify("Who founded Intel?", prompts, backend)
        assert exc_info.value.stage == "qu"
        assert "classification failed" in str(exc_info.value)

    def test_case_and_whitespace_tolerated(self, prompts):
        backend = ScriptedBackend([ScriptedRule(task="classify", output="  DEPENDENT \n")])
        assert classify("q?", prompts, backend) is QuestionType.DEPENDENT


class TestRephrase:
    def _context(self) -> QuestionContext:
        d = append_turn(
            Dialogue(),
            "Who is the author of Harry Potter?",
            [Answer(kind="entity", value="http://desk.example/e/J_K_Rowling", display_label="J. K. Rowling")],
        )
        return build_context(d, 100)

    def test_resolves_pronoun_against_context(self, prompts, desk_backend):
        text, flag = rephrase(
            "When was its first movie released?", self._context(), prompts, desk_backend
        )
        assert text == "When was the first Harry Potter movie released?"
        assert flag is None

    def test_empty_context_passthrough(self, prompts):
        backend = ScriptedBackend(
            [ScriptedRule(task="rephrase", output="Who founded Intel?")]
        )
        text, flag = rephrase("Who founded Intel?", QuestionContext(), prompts, backend)
        assert text == "Who founded Intel?"
        assert flag is None

    def test_entity_substitution_from_context(self, prompts):
        backend = ScriptedBackend(
            [
                ScriptedRule(
                    task="rephrase",
                    contains="her second novel",
                    output="What is the second novel of J. K. Rowling?",
                )
            ]
        )
        d = append_turn(
            Dialogue(),
            "Who wrote Harry Potter?",
            [Answer(kind="literal", value="J. K. Rowling")],
        )
        text, _ = rephrase(
            "What about her second novel?", build_context(d, 100), prompts, backend
        )
        assert "J. K. Rowling" in text

    def test_failure_falls_back_to_original(self, prompts):
        backend = ScriptedBackend([ScriptedRule(task="rephrase", output="")])
        text, flag = rephrase("What about it?", QuestionContext(), prompts, backend)
        assert text == "What about it?"
        assert flag == "rephrase_fallback"


class TestValidateTriples:
    def test_film_release_output_accepted(self):
        qir = validate_triples(RawTripleOutput(HP_JSON))
        assert isinstance(qir, QIR)
        assert qir.entities == ("Harry Potter",)
        assert qir.variables == ("?year",)
        assert qir.relations == ("released",)
        assert qir.target_variable == "?year"

    def test_grounded_boolean_accepted(self):
        raw = json.dumps(
            {
                "entities": ["Michelle", "Barack Obama"],
                "variables": [],
                "triples": [["Michelle", "wife of", "Barack Obama"]],
                "form": "boolean",
            }
        )
        qir = validate_triples(RawTripleOutput(raw))
        assert isinstance(qir, QIR)
        assert qir.form == "boolean"
        assert qir.variables == ()

    def test_all_variable_triple_rejected(self):
        raw = json.dumps({"triples": [["?x", "related", "?y"]], "form": "list"})
        outcome = validate_triples(RawTripleOutput(raw))
        assert outcome == ValidationFailure("no_known_entity")

    def test_non_boolean_without_variable_rejected(self):
        raw = json.dumps({"triples": [["Intel", "founded", "Fairchild"]], "form": "list"})
        assert validate_triples(RawTripleOutput(raw)) == ValidationFailure("no_variable")

    def test_malformed_json(self):
        assert validate_triples(RawTripleOutput("not json")) == ValidationFailure("malformed_json")
        assert validate_triples(RawTripleOutput("[1, 2]")) == ValidationFailure("malformed_json")

    def test_empty_components_rejected(self):
        for bad in (
            [["", "founded", "Intel"]],
            [["?x", "  ", "Intel"]],
            [["?x", "founded"]],
            [["?x", 3, "Intel"]],
            ["garbage"],
        ):
            raw = json.dumps({"triples": bad, "form": "list"})
            assert validate_triples(RawTripleOutput(raw)) == ValidationFailure("empty_component")

    def test_generic_relation_phrase_rejected(self):
        raw = json.dumps({"triples": [["?x", "has", "Intel"]], "form": "list"})
        assert validate_triples(RawTripleOutput(raw)) == ValidationFailure("empty_component")

    def test_missing_form_defaults_to_list(self):
        raw = json.dumps({"triples": [["Intel", "founded", "?x"]]})
        qir = validate_triples(RawTripleOutput(raw))
        assert isinstance(qir, QIR)
        assert qir.form == "list"

    def test_sets_derived_exactly_from_facts(self):
        raw = json.dumps(
            {
                "entities": ["Intel", "Orphan Corp"],
                "variables": ["?who", "?orphan"],
                "triples": [["?who", "founded", "Intel"]],
                "form": "list",
            }
        )
        qir = validate_triples(RawTripleOutput(raw))
        assert isinstance(qir, QIR)
        assert qir.entities == ("Intel",)
        assert qir.variables == ("?who",)
        assert qir.relations == ("founded",)

    def test_declared_variable_order_picks_target(self):
        raw = json.dumps(
            {
                "variables": ["?paper", "?year"],
                "triples": [["?year", "publication year", "?paper"], ["?paper", "written by", "Kramer"]],
                "form": "list",
            }
        )
        qir = validate_triples(RawTripleOutput(raw))
        assert isinstance(qir, QIR)
        assert qir.target_variable == "?paper"

    def test_seeded_fuzz_never_crashes(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(2000):
            blob = bytes(rng.randrange(256) for _ in range(rng.randrange(80)))
            outcome = validate_triples(RawTripleOutput(blob.decode("latin-1")))
            assert isinstance(outcome, (QIR, ValidationFailure))

    @given(st.text(max_size=200))
    def test_total_on_arbitrary_text(self, text):
        outcome = validate_triples(RawTripleOutput(text))
        assert isinstance(outcome, (QIR, ValidationFailure))

    @given(
        st.recursive(
            st.one_of(st.none(), st.booleans(), st.integers(), st.text(max_size=8)),
            lambda children: st.one_of(
                st.lists(children, max_size=4),
                st.dictionaries(st.text(max_size=8), children, max_size=4),
            ),
            max_leaves=20,
        )
    )
    def test_total_on_arbitrary_json(self, value):
        outcome = validate_triples(RawTripleOutput(json.dumps(value)))
        assert isinstance(outcome, (QIR, ValidationFailure))


class TestUnderstand:
    def test_dependent_question_recovers_film_release_qir(self, prompts, desk_backend):
        d = append_turn(
            Dialogue(),
            "Who is the author of Harry Potter?",
            [Answer(kind="entity", value="http://desk.example/e/J_K_Rowling", display_label="J. K. Rowling")],
        )
        out = understand(
            "When was its first movie released?",
            build_context(d, 100),
            EngineConfig(),
            prompts,
            desk_backend,
        )
        assert out.standalone_question == "When was the first Harry Potter movie released?"
        assert out.qir.entities == ("Harry Potter",)
        assert out.qir.facts[0].relation == "released"

    def test_self_contained_never_invokes_rephraser(self, prompts, desk_backend):
        understand(
            "Who founded Intel?", QuestionContext(), EngineConfig(), prompts, desk_backend
        )
        assert desk_backend.calls("rephrase") == 0
        assert desk_backend.calls("classify") == 1

    def test_malformed_extractor_fails_after_exactly_theta(self, prompts):
        theta = 3
        backend = ScriptedBackend(
            [
                ScriptedRule(task="classify", output="Self-contained"),
                ScriptedRule(task="extract", output="not json at all"),
            ]
        )
        with pytest.raises(PipelineError) as exc_info:
            understand("q?", QuestionContext(), EngineConfig(theta=theta), prompts, backend)
        assert exc_info.value.stage == "qu"
        assert backend.calls("extract") == theta

    @pytest.mark.parametrize("theta", [1, 2, 3])
    def test_fail_k_retry_boundaries(self, prompts, theta):
        # Failing theta-1 times still succeeds on the last attempt.
        backend = ScriptedBackend(
            [ScriptedRule(task="extract", output=HP_JSON, fail_first=theta - 1)]
        )
        qir = extract_qir("q", theta, prompts, backend)
        assert isinstance(qir, QIR)
        assert backend.calls("extract") == theta
        # Failing theta times exhausts the budget.
        backend = ScriptedBackend(
            [ScriptedRule(task="extract", output=HP_JSON, fail_first=theta)]
        )
        with pytest.raises(PipelineError):
            extract_qir("q", theta, prompts, backend)

    def test_llm_call_budget(self, prompts, desk_backend):
        theta = EngineConfig().theta
        d = append_turn(
            Dialogue(),
            "Who is the author of Harry Potter?",
            [Answer(kind="literal", value="J. K. Rowling")],
        )
        understand(
            "When was its first movie released?",
            build_context(d, 100),
            EngineConfig(),
            prompts,
            desk_backend,
        )
        assert desk_backend.total_calls() <= 2 + theta

    def test_gold_qir_fixture_oracle(self, prompts, desk_backend):
        with open(datafiles.gold_qirs_path(), "r", encoding="utf-8") as handle:
            gold = json.load(handle)
        config = EngineConfig()
        for entry in gold:
            out = understand(
                entry["question"],
                QuestionContext(),
                config,
                prompts,
                desk_backend,
                assume_self_contained=True,
            )
            assert list(out.qir.entities) == entry["entities"], entry["question"]
            assert list(out.qir.variables) == entry["variables"], entry["question"]
            assert out.qir.form == entry["form"], entry["question"]
            got_triples = [
                [
                    t.subject.phrase if hasattr(t.subject, "phrase") else t.subject.name,
                    t.relation,
                    t.object.phrase if hasattr(t.object, "phrase") else t.object.name,
                ]
                for t in out.qir.facts
            ]
            assert got_triples == entry["triples"], entry["question"]
