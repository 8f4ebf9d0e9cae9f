"""Benchmark replay and scoring.

Set metrics (precision / recall / F1) compare normalized answer sets;
ranked metrics (P@1 / MRR / Hit@5) respect the engine's deterministic
answer order. Failed items are tagged with the pipeline stage that broke,
and per-stage wall time plus executed-query counts are recorded per item.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from kgchat.model import Answer, EngineConfig
from kgchat.orchestrator import Engine, TurnResult

FAILURE_STAGES = ("qu", "linking", "selection", "execution")


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    gold_answers: tuple[Answer, ...]
    standalone_question: Optional[str] = None
    dialogue_id: Optional[str] = None
    turn_index: Optional[int] = None


@dataclass
class ItemOutcome:
    item: BenchmarkItem
    predicted: list[Answer] = field(default_factory=list)
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    p_at_1: float = 0.0
    mrr: float = 0.0
    hit_at_5: float = 0.0
    failed: bool = False
    failure_stage: Optional[str] = None
    executed_queries: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)
    error_message: Optional[str] = None


@dataclass
class MetricReport:
    outcomes: list[ItemOutcome] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def _mean(self, attr: str) -> float:
        if not self.outcomes:
            return 0.0
        return sum(getattr(o, attr) for o in self.outcomes) / len(self.outcomes)

    @property
    def precision(self) -> float:
        return self._mean("precision")

    @property
    def recall(self) -> float:
        return self._mean("recall")

    @property
    def f1(self) -> float:
        return self._mean("f1")

    @property
    def p_at_1(self) -> float:
        return self._mean("p_at_1")

    @property
    def mrr(self) -> float:
        return self._mean("mrr")

    @property
    def hit_at_5(self) -> float:
        return self._mean("hit_at_5")

    @property
    def failed_count(self) -> int:
        return sum(1 for o in self.outcomes if o.failed)

    def failure_breakdown(self) -> dict[str, int]:
        counts = {stage: 0 for stage in FAILURE_STAGES}
        for outcome in self.outcomes:
            if outcome.failed and outcome.failure_stage:
                counts[outcome.failure_stage] += 1
        return counts

    def as_dict(self) -> dict:
        return {
            "aggregate": {
                "items": self.size,
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "p_at_1": self.p_at_1,
                "mrr": self.mrr,
                "hit_at_5": self.hit_at_5,
                "failed": self.failed_count,
                "failure_breakdown": self.failure_breakdown(),
            },
            "items": [
                {
                    "id": o.item.id,
                    "question": o.item.question,
                    "predicted": [a.value for a in o.predicted],
                    "gold": [a.value for a in o.item.gold_answers],
                    "precision": o.precision,
                    "recall": o.recall,
                    "f1": o.f1,
                    "p_at_1": o.p_at_1,
                    "mrr": o.mrr,
                    "hit_at_5": o.hit_at_5,
                    "failed": o.failed,
                    "failure_stage": o.failure_stage,
                    "executed_queries": o.executed_queries,
                    "stage_seconds": o.stage_seconds,
                    "error": o.error_message,
                }
                for o in self.outcomes
            ],
        }

    def render_table(self) -> str:
        header = f"{'id':<10} {'P':>7} {'R':>7} {'F1':>7} {'P@1':>5} {'MRR':>7} {'Hit@5':>5}  {'queries':>7}  stage"
        lines = [header, "-" * len(header)]
        for o in self.outcomes:
            stage = o.failure_stage or ("-" if not o.failed else "?")
            lines.append(
                f"{o.item.id:<10} {o.precision:>7.4f} {o.recall:>7.4f} {o.f1:>7.4f}"
                f" {o.p_at_1:>5.2f} {o.mrr:>7.4f} {o.hit_at_5:>5.2f}  {o.executed_queries:>7}  {stage}"
            )
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':<10} {self.precision:>7.4f} {self.recall:>7.4f} {self.f1:>7.4f}"
            f" {self.p_at_1:>5.2f} {self.mrr:>7.4f} {self.hit_at_5:>5.2f}"
            f"  failed={self.failed_count}/{self.size}"
        )
        return "\n".join(lines)


# -- answer normalization and metrics ----------------------------------------


def normalize_answer(answer: Answer) -> tuple[str, str]:
    """Comparison key: IRIs compare exactly, numerics by value, everything
    else case-insensitively after trimming (a gold "2001" matches a typed
    integer 2001)."""
    if answer.kind == "entity":
        return ("iri", answer.value)
    text = answer.value.strip()
    try:
        return ("num", repr(int(text)))
    except ValueError:
        pass
    try:
        return ("num", repr(float(text)))
    except ValueError:
        pass
    return ("text", text.casefold())


def score_set(predicted: Sequence[Answer], gold: Sequence[Answer]) -> tuple[float, float, float]:
    """Set-semantics precision, recall, and F1 over normalized answers."""
    predicted_keys = {normalize_answer(a) for a in predicted}
    gold_keys = {normalize_answer(a) for a in gold}
    if not predicted_keys and not gold_keys:
        return (1.0, 1.0, 1.0)
    if not predicted_keys or not gold_keys:
        return (0.0, 0.0, 0.0)
    correct = len(predicted_keys & gold_keys)
    precision = correct / len(predicted_keys)
    recall = correct / len(gold_keys)
    if precision + recall == 0.0:
        return (0.0, 0.0, 0.0)
    f1 = 2.0 * precision * recall / (precision + recall)
    return (precision, recall, f1)


def score_ranked(predicted: Sequence[Answer], gold: Sequence[Answer]) -> tuple[float, float, float]:
    """P@1, MRR, and Hit@5 of the ranked predicted list against the gold set."""
    gold_keys = {normalize_answer(a) for a in gold}
    if not gold_keys:
        return (1.0, 1.0, 1.0) if not predicted else (0.0, 0.0, 0.0)
    first_hit = None
    for rank, answer in enumerate(predicted, start=1):
        if normalize_answer(answer) in gold_keys:
            first_hit = rank
            break
    p_at_1 = 1.0 if first_hit == 1 else 0.0
    mrr = 1.0 / first_hit if first_hit else 0.0
    hit_at_5 = 1.0 if first_hit is not None and first_hit <= 5 else 0.0
    return (p_at_1, mrr, hit_at_5)


# -- benchmark loading --------------------------------------------------------


def _answer_from_json(raw: object) -> Answer:
    if isinstance(raw, dict):
        return Answer(
            kind=raw.get("kind", "literal"),
            value=str(raw.get("value", "")),
            display_label=raw.get("display_label"),
        )
    text = str(raw)
    kind = "entity" if text.startswith(("http://", "https://", "urn:")) else "literal"
    return Answer(kind=kind, value=text)


def load_single_benchmark(path: str) -> list[BenchmarkItem]:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    raw_items = data["items"] if isinstance(data, dict) else data
    items = []
    for entry in raw_items:
        items.append(
            BenchmarkItem(
                id=str(entry["id"]),
                question=entry["question"],
                gold_answers=tuple(_answer_from_json(a) for a in entry.get("answers", [])),
            )
        )
    return items


def load_dialogue_benchmark(path: str) -> list[BenchmarkItem]:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    raw_dialogues = data["dialogues"] if isinstance(data, dict) else data
    items = []
    for dialogue in raw_dialogues:
        dialogue_id = str(dialogue["dialogue_id"])
        for index, turn in enumerate(dialogue["turns"], start=1):
            items.append(
                BenchmarkItem(
                    id=f"{dialogue_id}.t{index}",
                    question=turn["question"],
                    standalone_question=turn.get("standalone"),
                    gold_answers=tuple(_answer_from_json(a) for a in turn.get("answers", [])),
                    dialogue_id=dialogue_id,
                    turn_index=index,
                )
            )
    return items


# -- replay -------------------------------------------------------------------


def _score_outcome(outcome: ItemOutcome, result: Optional[TurnResult]) -> None:
    gold = outcome.item.gold_answers
    if result is not None:
        outcome.predicted = list(result.answers)
        outcome.executed_queries = result.executed_queries
        outcome.stage_seconds = dict(result.stage_seconds)
        if result.error is not None:
            outcome.failure_stage = result.error[0]
            outcome.error_message = result.error[1]
    outcome.precision, outcome.recall, outcome.f1 = score_set(outcome.predicted, gold)
    outcome.p_at_1, outcome.mrr, outcome.hit_at_5 = score_ranked(outcome.predicted, gold)
    outcome.failed = outcome.recall == 0.0
    if outcome.failed and outcome.failure_stage is None:
        # No pipeline error: the queries ran but retrieved nothing usable.
        outcome.failure_stage = "execution"
    if not outcome.failed:
        outcome.failure_stage = None


def run_benchmark(
    items: Sequence[BenchmarkItem],
    config: EngineConfig,
    engine: Optional[Engine] = None,
    use_standalone: bool = False,
) -> MetricReport:
    """Replay benchmark items through the engine.

    Items sharing a dialogue_id run in order within one session; independent
    items get fresh sessions. With ``use_standalone`` the paired standalone
    question is asked in single-turn mode instead, which is how retention is
    measured against dialogue-mode runs.
    """
    engine = engine or Engine(config)
    report = MetricReport()
    sessions: dict[str, object] = {}
    for item in items:
        outcome = ItemOutcome(item=item)
        question = item.question
        item_config = config
        if use_standalone and item.standalone_question:
            question = item.standalone_question
        if use_standalone and config.system_mode != "single_turn":
            item_config = config.with_overrides({"system_mode": "single_turn"})
        if item.dialogue_id and not use_standalone:
            state = sessions.get(item.dialogue_id)
            if state is None:
                state = engine.new_session(f"bench-{item.dialogue_id}")
                sessions[item.dialogue_id] = state
        else:
            state = engine.new_session(f"bench-{item.id}")
        started = time.perf_counter()
        result = engine.process_turn(state, question, item_config)
        result.stage_seconds["total"] = time.perf_counter() - started
        _score_outcome(outcome, result)
        report.outcomes.append(outcome)
    return report
