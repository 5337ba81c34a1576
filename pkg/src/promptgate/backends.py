"""LLM provider adapters and the prompt protocols the gateway speaks.

Two backends share one contract: a deterministic mock used by tests and CI,
and an HTTP backend targeting an OLLAMA-compatible chat endpoint for live
use. The prompt builders produce the three message shapes the middleware
needs: service discovery, operation binding, and result presentation.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import BackendError
from .tracing import TraceEvent, TraceStore

# Markers the mock uses to recognize which protocol a message list speaks.
DISCOVERY_MARKER = "list of applications"
BINDING_MARKER = "allowed operations"
PRESENTATION_MARKER = "Present the result"

# Verb families for the mock's deterministic arithmetic extraction.
_VERB_TABLE = (
    ("multiply", ("multiply", "times", "product")),
    ("subtract", ("subtract", "minus", "difference", "take away")),
    ("add", ("add", "plus", "sum", "total", "combine")),
)

_NUMBER = re.compile(r"\b\d+\b")

# function words carry no signal when the mock scores app descriptions
_STOPWORDS = frozenset(
    "a an and are can do for i is it me of or please that the to what will you".split()
)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role: {self.role}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message must have content")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # mock | http
    base_url: str | None = None
    model_name: str = "mock-model"
    timeout_s: float = 30.0
    max_concurrent: int = 8
    # mock-only knobs
    fault_probability: float = 0.0
    fault_seed: int = 0
    adversarial_operations: tuple[str, ...] = ()
    simulated_latency_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ValueError(f"bad backend kind: {self.kind}")
        if self.kind == "http" and not self.base_url:
            raise ValueError("http backend requires base_url")


# --- prompt protocol ---------------------------------------------------------


def discovery_prompt(registry_meta: dict[str, str], user_prompt: str) -> list[ChatMessage]:
    """Service-discovery messages: registry meta + the choose-or-empty rule."""
    if not registry_meta:
        raise ValueError("registry_meta must be non-empty")
    if not user_prompt:
        raise ValueError("user prompt must be non-empty")
    system = (
        f"Given the following list of applications: {json.dumps(registry_meta)}, "
        "return only the name of the application you think is appropriate to help "
        "with the following prompt. If no application is appropriate or relevant "
        "to help, simply return an empty string."
    )
    return [ChatMessage("system", system), ChatMessage("user", user_prompt)]


def binding_prompt(allowed_operations: list[str] | tuple[str, ...], user_prompt: str) -> list[ChatMessage]:
    """Operation-binding messages: map prompt elements onto allowed operations."""
    if not allowed_operations:
        raise ValueError("allowed_operations must be non-empty")
    if not user_prompt:
        raise ValueError("user prompt must be non-empty")
    example = json.dumps([{"operation": "add", "numbers": [3, 3]}])
    system = (
        f"Given the following allowed operations: {json.dumps(list(allowed_operations))}, "
        "identify which elements from the prompt should be associated with what "
        "operation, and only return a JSON formatted list of that (operation, and "
        f"numbers). For example, the JSON should look like this: {example} "
        "The response should only contain the JSON."
    )
    return [ChatMessage("system", system), ChatMessage("user", user_prompt)]


def presentation_prompt(user_prompt: str, results: list) -> list[ChatMessage]:
    """Result-presentation messages: turn raw service results into a reply."""
    if not user_prompt:
        raise ValueError("user prompt must be non-empty")
    system = (
        "You turn raw computation results into a short reply. "
        "Present the result of the user's request in one sentence."
    )
    user = f"Request: {user_prompt}\nResults: {json.dumps(results)}"
    return [ChatMessage("system", system), ChatMessage("user", user)]


def direct_prompt(user_prompt: str) -> list[ChatMessage]:
    return [
        ChatMessage("system", "You are a helpful assistant."),
        ChatMessage("user", user_prompt),
    ]


def _check_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[-1].role != "user":
        raise ValueError("messages must end with a user message")


def extract_arithmetic(text: str) -> tuple[str | None, list[int]]:
    """Pick the verb family and the unsigned integers out of a prompt."""
    low = text.lower()
    operation = None
    for name, cues in _VERB_TABLE:
        if any(cue in low for cue in cues):
            operation = name
            break
    numbers = [int(n) for n in _NUMBER.findall(text)]
    return operation, numbers


def _fold(operation: str, numbers: list[int]) -> int:
    if operation == "add":
        return sum(numbers)
    if operation == "subtract":
        acc = numbers[0]
        for n in numbers[1:]:
            acc -= n
        return acc
    acc = 1
    for n in numbers:
        acc *= n
    return acc


class _BackendBase:
    """Shared admission control and latency tracing for all backends."""

    def __init__(self, config: BackendConfig, traces: TraceStore | None = None):
        self.config = config
        self._traces = traces
        self._admission = threading.BoundedSemaphore(config.max_concurrent)

    def complete(self, messages: list[ChatMessage], request_id: str = "-") -> str:
        _check_messages(messages)
        started = time.time()
        if not self._admission.acquire(timeout=self.config.timeout_s):
            raise BackendError("admission timeout: too many in-flight requests")
        try:
            reply = self._complete(messages)
        finally:
            self._admission.release()
        if self._traces is not None:
            self._traces.record(
                TraceEvent(
                    request_id=request_id,
                    component="llm-backend",
                    event="complete",
                    started_at=started,
                    ended_at=time.time(),
                    attributes={"model": self.config.model_name, "kind": self.config.kind},
                )
            )
        return reply

    def _complete(self, messages: list[ChatMessage]) -> str:
        raise NotImplementedError


class MockBackend(_BackendBase):
    """Deterministic stand-in for a chat model.

    The reply is a pure function of the message list (plus the frozen
    config), which the replay and CI guarantees depend on. Fault injection
    is hash-based so a given conversation always fails the same way.
    """

    def _complete(self, messages: list[ChatMessage]) -> str:
        if self.config.simulated_latency_s > 0:
            time.sleep(self.config.simulated_latency_s)
        system = messages[0].content if messages[0].role == "system" else ""
        prompt = messages[-1].content
        if BINDING_MARKER in system:
            return self._binding_reply(messages, system, prompt)
        if DISCOVERY_MARKER in system:
            return self._discovery_reply(system, prompt)
        if PRESENTATION_MARKER in system:
            return self._presentation_reply(prompt)
        return self._general_reply(prompt)

    # -- protocol replies ------------------------------------------------

    def _binding_reply(self, messages: list[ChatMessage], system: str, prompt: str) -> str:
        allowed = self._parse_json_blob(system, list) or []
        roll = self._unit_roll(messages)
        if roll < self.config.fault_probability:
            return self._fault_reply(messages)
        operation, numbers = extract_arithmetic(prompt)
        if not numbers:
            return "[]"
        if operation is None:
            operation = allowed[0] if allowed else "add"
        return json.dumps([{"operation": operation, "numbers": numbers}])

    def _discovery_reply(self, system: str, prompt: str) -> str:
        meta = self._parse_json_blob(system, dict) or {}
        prompt_tokens = [
            t
            for t in set(re.findall(r"[0-9a-z]+", prompt.lower()))
            if t not in _STOPWORDS
        ]
        best_name, best_score = "", 0
        for name, description in meta.items():
            doc_tokens = set(re.findall(r"[0-9a-z]+", f"{name} {description}".lower()))
            doc_tokens -= _STOPWORDS
            score = sum(1 for t in prompt_tokens if self._word_match(t, doc_tokens))
            if score > best_score:
                best_name, best_score = name, score
        return best_name

    @staticmethod
    def _word_match(token: str, doc_tokens: set[str]) -> bool:
        if token in doc_tokens:
            return True
        # crude stemming: shared prefix of length >= 3 (add/adds, rain/rainy)
        if len(token) < 3:
            return False
        return any(
            len(d) >= 3 and (d.startswith(token) or token.startswith(d))
            for d in doc_tokens
        )

    def _presentation_reply(self, prompt: str) -> str:
        match = re.search(r"Results: (.*)$", prompt, re.DOTALL)
        values: list = []
        if match:
            try:
                values = json.loads(match.group(1))
            except json.JSONDecodeError:
                values = []
        if not values:
            return "There is no result to report."
        if len(values) == 1:
            return f"The result is {values[0]}."
        rendered = ", ".join(str(v) for v in values)
        return f"The results are {rendered}."

    def _general_reply(self, prompt: str) -> str:
        operation, numbers = extract_arithmetic(prompt)
        if operation and numbers:
            return f"The answer is {_fold(operation, numbers)}."
        return "I am not sure how to help with that."

    # -- fault machinery ---------------------------------------------------

    def _fault_reply(self, messages: list[ChatMessage]) -> str:
        kinds = ["prose", "truncated", "bad-types"]
        if self.config.adversarial_operations:
            kinds.append("forbidden-op")
        pick = kinds[int(self._unit_roll(messages, salt="kind") * len(kinds)) % len(kinds)]
        if pick == "prose":
            return "Sure, I would be happy to help with that calculation!"
        if pick == "truncated":
            return '[{"operation": "add", "numbers": [3,'
        if pick == "bad-types":
            return json.dumps([{"operation": "add", "numbers": ["three", "three"]}])
        target = self.config.adversarial_operations[
            int(self._unit_roll(messages, salt="adv") * len(self.config.adversarial_operations))
            % len(self.config.adversarial_operations)
        ]
        _, numbers = extract_arithmetic(messages[-1].content)
        return json.dumps([{"operation": target, "numbers": numbers or [1, 2]}])

    def _unit_roll(self, messages: list[ChatMessage], salt: str = "") -> float:
        payload = json.dumps(
            [m.to_dict() for m in messages], sort_keys=True, ensure_ascii=False
        ) + f"|{self.config.fault_seed}|{salt}"
        digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2**64

    @staticmethod
    def _parse_json_blob(text: str, kind: type):
        opener, closer = ("[", "]") if kind is list else ("{", "}")
        start = text.find(opener)
        if start < 0:
            return None
        depth = 0
        for i in range(start, len(text)):
            if text[i] == opener:
                depth += 1
            elif text[i] == closer:
                depth -= 1
                if depth == 0:
                    try:
                        return json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        return None
        return None


class HttpBackend(_BackendBase):
    """OLLAMA-compatible chat completion client (POST {base_url}/api/chat)."""

    def __init__(self, config: BackendConfig, traces: TraceStore | None = None):
        super().__init__(config, traces)
        self._client = httpx.Client(timeout=config.timeout_s)

    def _complete(self, messages: list[ChatMessage]) -> str:
        url = self.config.base_url.rstrip("/") + "/api/chat"
        body = {
            "model": self.config.model_name,
            "messages": [m.to_dict() for m in messages],
            "stream": False,
        }
        try:
            response = self._client.post(url, json=body)
            response.raise_for_status()
        except httpx.TimeoutException as exc:
            raise BackendError(f"backend timeout: {exc}") from exc
        except httpx.HTTPError as exc:
            raise BackendError(f"backend transport failure: {exc}") from exc
        try:
            return response.json()["message"]["content"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BackendError(f"malformed provider response: {exc}") from exc

    def close(self) -> None:
        self._client.close()


def make_backend(config: BackendConfig, traces: TraceStore | None = None) -> _BackendBase:
    if config.kind == "http":
        return HttpBackend(config, traces)
    return MockBackend(config, traces)
