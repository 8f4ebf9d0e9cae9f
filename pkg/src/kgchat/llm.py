"""Uniform interface to task-managed LLMs.

A request carries a :class:`PromptSpec` (instruction, strategy, few-shot
examples) plus a rendered payload; backends return the model's raw text
verbatim. Parsing and validation belong to the calling agents, as does the
retry policy. Two backends are provided: an OpenAI-compatible HTTP client
and a deterministic scripted backend for offline tests.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence

import requests

STRATEGIES = ("zero_shot", "few_shot", "chain_of_thought_few_shot")

OUTPUT_CONTRACTS = ("label", "free_text", "json_object")

PROMPT_NAMES = (
    "classify",
    "rephrase",
    "extract",
    "vertex_select",
    "predicate_select",
    "final_answer",
    "translate",
)


class LlmError(Exception):
    """Base class for gateway failures; carries the backend identity."""

    def __init__(self, message: str, backend_id: str = "unknown"):
        super().__init__(message)
        self.backend_id = backend_id


class LlmTransportError(LlmError):
    """Transient transport failure; the calling agent may retry within its budget."""


class LlmRefusalError(LlmError):
    """Permanent backend failure (bad request, refusal, missing rule); not retriable."""


@dataclass(frozen=True)
class PromptSpec:
    instruction: str
    strategy: str = "zero_shot"
    examples: tuple[tuple[str, str], ...] = ()
    output_contract: str = "free_text"
    name: str = ""
    input_template: str = "{question}"

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown prompt strategy: {self.strategy!r}")
        if self.output_contract not in OUTPUT_CONTRACTS:
            raise ValueError(f"unknown output contract: {self.output_contract!r}")
        if self.strategy == "zero_shot" and self.examples:
            raise ValueError("zero-shot prompts must not carry examples")
        if self.strategy != "zero_shot" and not self.examples:
            raise ValueError("few-shot prompts must carry at least one example")


@dataclass(frozen=True)
class LlmRequest:
    prompt: PromptSpec
    payload: str


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    backend_id: str


def chat_messages(request: LlmRequest) -> list[dict[str, str]]:
    """Assemble the instruction, worked examples, and payload into chat turns."""
    messages = [{"role": "system", "content": request.prompt.instruction}]
    for example_in, example_out in request.prompt.examples:
        messages.append({"role": "user", "content": example_in})
        messages.append({"role": "assistant", "content": example_out})
    messages.append({"role": "user", "content": request.payload})
    return messages


class HttpChatBackend:
    """OpenAI-compatible chat-completion client.

    POSTs ``{model, messages, temperature}`` to ``<url>/chat/completions``
    with a bearer token read from the configured environment variable and
    returns the first choice's text.
    """

    def __init__(
        self,
        url: str,
        model: str,
        temperature: float = 0.0,
        api_key_env: str = "KGCHAT_API_KEY",
        timeout: float = 120.0,
        session: Optional[requests.Session] = None,
    ):
        if not url:
            raise ValueError("HTTP backend requires a base URL")
        self.url = url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session or requests.Session()
        self.backend_id = f"http:{model}@{self.url}"

    def complete(self, request: LlmRequest) -> LlmResponse:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.model,
            "messages": chat_messages(request),
            "temperature": self.temperature,
        }
        try:
            response = self.session.post(
                f"{self.url}/chat/completions", json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise LlmTransportError(f"LLM transport failure: {exc}", self.backend_id) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise LlmTransportError(
                f"LLM backend returned {response.status_code}", self.backend_id
            )
        if response.status_code != 200:
            raise LlmRefusalError(
                f"LLM backend rejected the request ({response.status_code}): "
                f"{response.text[:200]}",
                self.backend_id,
            )
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmRefusalError(f"malformed completion body: {exc}", self.backend_id) from exc
        return LlmResponse(raw_text=content, backend_id=self.backend_id)


@dataclass
class ScriptedRule:
    """One canned response: matches on the prompt name and a payload substring.

    ``fail_first`` makes the first k matching calls raise a transport error,
    which is how tests exercise the bounded retry loops.
    """

    task: Optional[str] = None
    contains: Optional[str] = None
    output: str = ""
    fail_first: int = 0
    matcher: Optional[Callable[[LlmRequest], bool]] = None
    failures_left: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        self.failures_left = self.fail_first

    def matches(self, request: LlmRequest) -> bool:
        if self.matcher is not None:
            return self.matcher(request)
        if self.task is not None and request.prompt.name != self.task:
            return False
        if self.contains is not None and self.contains not in request.payload:
            return False
        return True


class ScriptedBackend:
    """Deterministic stand-in LLM: first matching rule wins.

    Stateless apart from per-rule failure counters, which are updated under a
    lock so concurrent sessions see a consistent retry schedule.
    """

    backend_id = "scripted"

    def __init__(self, rules: Sequence[ScriptedRule]):
        if not rules:
            raise ValueError("scripted backend requires at least one rule")
        self.rules = list(rules)
        self.call_counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, request: LlmRequest) -> LlmResponse:
        with self._lock:
            task = request.prompt.name or "unnamed"
            self.call_counts[task] = self.call_counts.get(task, 0) + 1
            for rule in self.rules:
                if not rule.matches(request):
                    continue
                if rule.failures_left > 0:
                    rule.failures_left -= 1
                    raise LlmTransportError("scripted failure", self.backend_id)
                return LlmResponse(raw_text=rule.output, backend_id=self.backend_id)
        raise LlmRefusalError(
            f"no scripted rule matches task {request.prompt.name!r}", self.backend_id
        )

    def reset(self) -> None:
        with self._lock:
            self.call_counts.clear()
            for rule in self.rules:
                rule.failures_left = rule.fail_first

    def calls(self, task: str) -> int:
        with self._lock:
            return self.call_counts.get(task, 0)

    def total_calls(self) -> int:
        with self._lock:
            return sum(self.call_counts.values())

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        """Load rules from a JSON list of {task, contains, output, fail_first}."""
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        rules = []
        for entry in raw:
            output = entry.get("output", "")
            if not isinstance(output, str):
                output = json.dumps(output)
            rules.append(
                ScriptedRule(
                    task=entry.get("task"),
                    contains=entry.get("contains"),
                    output=output,
                    fail_first=int(entry.get("fail_first", 0)),
                )
            )
        return cls(rules)


_EXAMPLE_IN = "### EXAMPLE INPUT"
_EXAMPLE_OUT = "### EXAMPLE OUTPUT"
_INPUT_TEMPLATE = "### INPUT TEMPLATE"

_PROMPT_META = {
    # name -> (strategy, output_contract)
    "classify": ("zero_shot", "label"),
    "rephrase": ("zero_shot", "free_text"),
    "extract": ("chain_of_thought_few_shot", "json_object"),
    "vertex_select": ("zero_shot", "json_object"),
    "predicate_select": ("zero_shot", "json_object"),
    "final_answer": ("zero_shot", "free_text"),
    "translate": ("zero_shot", "free_text"),
}


def parse_prompt_file(name: str, text: str) -> PromptSpec:
    """Split a plain-text prompt file into instruction, examples, and the
    per-call input template."""
    strategy, contract = _PROMPT_META[name]
    input_template = "{question}"
    body = text
    if _INPUT_TEMPLATE in body:
        body, _, template_part = body.partition(_INPUT_TEMPLATE)
        input_template = template_part.strip("\n")
    sections = body.split(_EXAMPLE_IN)
    instruction = sections[0].strip()
    examples = []
    for chunk in sections[1:]:
        if _EXAMPLE_OUT not in chunk:
            raise ValueError(f"prompt {name!r}: example input without output")
        example_in, _, example_out = chunk.partition(_EXAMPLE_OUT)
        examples.append((example_in.strip(), example_out.strip()))
    return PromptSpec(
        instruction=instruction,
        strategy=strategy,
        examples=tuple(examples),
        output_contract=contract,
        name=name,
        input_template=input_template,
    )


class PromptLibrary:
    """Loads the per-task prompt files and renders per-call requests."""

    def __init__(self, specs: dict[str, PromptSpec]):
        missing = set(PROMPT_NAMES) - set(specs)
        if missing:
            raise ValueError(f"missing prompts: {sorted(missing)}")
        self.specs = specs

    @classmethod
    def bundled(cls) -> "PromptLibrary":
        specs = {}
        for name in PROMPT_NAMES:
            text = resources.files("kgchat").joinpath(f"prompts/{name}.txt").read_text("utf-8")
            specs[name] = parse_prompt_file(name, text)
        return cls(specs)

    @classmethod
    def from_dir(cls, directory: str) -> "PromptLibrary":
        specs = {}
        for name in PROMPT_NAMES:
            with open(os.path.join(directory, f"{name}.txt"), "r", encoding="utf-8") as handle:
                specs[name] = parse_prompt_file(name, handle.read())
        return cls(specs)

    def build_request(self, name: str, **values: str) -> LlmRequest:
        spec = self.specs[name]
        try:
            payload = spec.input_template.format(**values)
        except KeyError as exc:
            raise ValueError(f"prompt {name!r} is missing placeholder value {exc}") from exc
        return LlmRequest(prompt=spec, payload=payload)


def backend_from_spec(spec) -> object:
    """Instantiate the backend named by an EngineConfig backend descriptor."""
    if spec.kind == "scripted":
        if not spec.rules_file:
            raise ValueError("scripted backend requires rules_file")
        return ScriptedBackend.from_file(spec.rules_file)
    return HttpChatBackend(
        url=spec.url,
        model=spec.model,
        temperature=spec.temperature,
        api_key_env=spec.api_key_env,
    )
