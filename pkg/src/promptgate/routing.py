"""Utterance routing: pick the service for a prompt, then bind its arguments.

Three stages, cheap to expensive: vector recall over embedded example
utterances, a token-overlap rerank that credits {slot} placeholders for
absorbing numbers, and an LLM binding step that turns the prompt into typed
(operation, numbers) pairs. Anything below the confidence threshold abstains
so the prompt falls through to a plain model reply.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .backends import ChatMessage, binding_prompt
from .embedding import DEFAULT_DIMENSION, embed, is_zero, tokenize
from .services import SLOT_PATTERN, ProcedureSpec, ServiceDescriptor, ServiceRegistry
from .tracing import TraceEvent, TraceStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RouterConfig:
    dimension: int = DEFAULT_DIMENSION
    knn_k: int = 5
    abstain_threshold: float = 0.35
    extraction_retries: int = 2


@dataclass(frozen=True)
class IndexEntry:
    service: str
    utterance: str
    vector: np.ndarray
    repeated_slots: frozenset[str] = frozenset()


class VectorIndex:
    """Flat inner-product index over utterance embeddings.

    Deliberately exhaustive: entry counts are small (services x utterances)
    and an exact scan keeps ranking reproducible. Ties break by insertion
    order; results truncate to k.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self._entries: list[IndexEntry] = []

    def add(self, service: str, utterance: str, repeated_slots: frozenset[str] = frozenset()) -> None:
        vector = embed(utterance, self.dimension)
        self._entries.append(IndexEntry(service, utterance, vector, repeated_slots))

    def clear(self) -> None:
        self._entries = []

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[IndexEntry]:
        return list(self._entries)

    def knn(
        self, query: np.ndarray, k: int, allowed: set[str] | None = None
    ) -> list[tuple[IndexEntry, float]]:
        scored: list[tuple[float, int, IndexEntry]] = []
        for position, entry in enumerate(self._entries):
            if allowed is not None and entry.service not in allowed:
                continue
            scored.append((float(np.dot(query, entry.vector)), position, entry))
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [(entry, score) for score, _, entry in scored[:k]]


def rerank_score(
    prompt: str, utterance: str, repeated_slots: frozenset[str] = frozenset()
) -> float:
    """Token Jaccard where {slot} placeholders absorb unmatched numbers.

    "add 5 and 3" against "add {a} and {b}" scores 1.0: both literal tokens
    match and the two slots soak up 5 and 3. A slot naming a repeated (list)
    parameter absorbs any count of numbers, so "add 1 and 2 and ... and 20"
    still saturates a two-slot template. Unfilled scalar slots count against
    the union so a ten-slot template does not dominate a two-number prompt.
    """
    prompt_tokens = set(tokenize(prompt))
    literal_tokens = set(tokenize(utterance))
    slot_names = SLOT_PATTERN.findall(utterance)
    matched = len(prompt_tokens & literal_tokens)
    numeric_extra = sum(1 for t in prompt_tokens - literal_tokens if t.isdigit())
    if any(name in repeated_slots for name in slot_names):
        absorbed = numeric_extra
        deficit = 0
    else:
        absorbed = min(len(slot_names), numeric_extra)
        deficit = len(slot_names) - absorbed
    denominator = len(prompt_tokens | literal_tokens) + deficit
    if denominator == 0:
        return 0.0
    return (matched + absorbed) / denominator


@dataclass(frozen=True)
class BindingOp:
    operation: str
    numbers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"operation": self.operation, "numbers": list(self.numbers)}


@dataclass
class RoutingDecision:
    abstained: bool
    service: str | None = None
    score: float = 0.0
    margin: float = 0.0
    candidates: list[dict] = field(default_factory=list)
    operations: list[BindingOp] | None = None
    clarification_question: str | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "abstained": self.abstained,
            "service": self.service,
            "score": round(self.score, 6),
            "margin": round(self.margin, 6),
            "candidates": self.candidates,
            "operations": [op.to_dict() for op in self.operations]
            if self.operations is not None
            else None,
            "clarification_question": self.clarification_question,
            "reason": self.reason,
        }


def bind_arguments(proc: ProcedureSpec, numbers: list) -> dict[str, Any] | None:
    """Map a flat numbers list onto a procedure's parameters, or None if the
    shape cannot fit (wrong arity, non-numeric slot in the signature)."""
    params = proc.parameters
    if len(params) == 1 and params[0].repeated and params[0].type in ("number", "integer"):
        return {params[0].name: list(numbers)}
    if all(not p.repeated and p.type in ("number", "integer") for p in params):
        if len(numbers) != len(params):
            return None
        return {p.name: n for p, n in zip(params, numbers)}
    return None


def _extract_json_list(text: str) -> list | None:
    """First balanced JSON list in the text, or the whole text if it parses."""
    try:
        value = json.loads(text)
        if isinstance(value, list):
            return value
    except json.JSONDecodeError:
        pass
    start = text.find("[")
    if start < 0:
        return None
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "[":
            depth += 1
        elif text[i] == "]":
            depth -= 1
            if depth == 0:
                try:
                    value = json.loads(text[start : i + 1])
                except json.JSONDecodeError:
                    return None
                return value if isinstance(value, list) else None
    return None


class Router:
    def __init__(
        self,
        registry: ServiceRegistry,
        backend,
        config: RouterConfig | None = None,
        traces: TraceStore | None = None,
    ):
        self.registry = registry
        self.backend = backend
        self.config = config or RouterConfig()
        self._traces = traces
        self.index = VectorIndex(self.config.dimension)
        self.rebuild()

    def rebuild(self) -> None:
        self.index.clear()
        for descriptor in self.registry.list_services():
            repeated = frozenset(
                p.name
                for proc in descriptor.procedures
                for p in proc.parameters
                if p.repeated
            )
            for utterance in descriptor.utterances:
                self.index.add(descriptor.name, utterance, repeated)
        log.debug("router index rebuilt: %d entries", len(self.index))

    # -- routing -----------------------------------------------------------

    def route(
        self,
        prompt: str,
        allowed_services: set[str] | None = None,
        request_id: str = "-",
    ) -> RoutingDecision:
        """Decide which service (if any) should handle the prompt.

        allowed_services is the caller's certificate scope; entries outside
        it are invisible to recall, so a denied service can never win.
        """
        started = time.time()
        decision = self._route(prompt, allowed_services, request_id)
        if self._traces is not None:
            self._traces.record(
                TraceEvent(
                    request_id=request_id,
                    component="router",
                    event="route",
                    started_at=started,
                    ended_at=time.time(),
                    attributes={
                        "abstained": decision.abstained,
                        "service": decision.service,
                        "score": round(decision.score, 6),
                        "margin": round(decision.margin, 6),
                        "reason": decision.reason,
                    },
                )
            )
        return decision

    def _route(
        self, prompt: str, allowed_services: set[str] | None, request_id: str
    ) -> RoutingDecision:
        query = embed(prompt, self.config.dimension)
        if is_zero(query):
            return RoutingDecision(abstained=True, reason="prompt has no tokens")
        neighbors = self.index.knn(query, self.config.knn_k, allowed_services)
        if not neighbors:
            return RoutingDecision(abstained=True, reason="no candidate utterances in scope")

        reranked = [
            (entry, rerank_score(prompt, entry.utterance, entry.repeated_slots))
            for entry, _ in neighbors
        ]
        reranked.sort(key=lambda item: -item[1])
        candidates = [
            {"service": entry.service, "utterance": entry.utterance, "score": round(score, 6)}
            for entry, score in reranked
        ]
        top_entry, top_score = reranked[0]
        other_scores = [s for e, s in reranked if e.service != top_entry.service]
        margin = top_score - other_scores[0] if other_scores else top_score

        if top_score < self.config.abstain_threshold:
            return RoutingDecision(
                abstained=True,
                score=top_score,
                margin=margin,
                candidates=candidates,
                reason=f"top score {top_score:.3f} below threshold "
                f"{self.config.abstain_threshold}",
            )

        descriptor = self.registry.get(top_entry.service)
        operations, clarification = self.extract_parameters(descriptor, prompt, request_id)
        return RoutingDecision(
            abstained=False,
            service=descriptor.name,
            score=top_score,
            margin=margin,
            candidates=candidates,
            operations=operations,
            clarification_question=clarification,
            reason="selected by rerank",
        )

    # -- parameter extraction -------------------------------------------------

    def extract_parameters(
        self, descriptor: ServiceDescriptor, prompt: str, request_id: str = "-"
    ) -> tuple[list[BindingOp] | None, str | None]:
        """LLM-bind the prompt onto the service's operations.

        Retries feed the model its own invalid reply plus the validation
        problem. After the retry budget the caller gets a clarification
        question instead of operations; extraction failure is recoverable,
        not a routing abstention.
        """
        allowed = descriptor.operation_names()
        messages = binding_prompt(allowed, prompt)
        problem = ""
        for _ in range(1 + self.config.extraction_retries):
            reply = self.backend.complete(messages, request_id)
            operations, problem = self._validate_binding(descriptor, reply)
            if operations is not None:
                return operations, None
            messages = messages + [
                ChatMessage("assistant", reply or "(empty reply)"),
                ChatMessage(
                    "user",
                    f"That response was not usable: {problem}. "
                    "Return only the JSON list described above.",
                ),
            ]
        log.info("parameter extraction gave up for %s: %s", descriptor.name, problem)
        question = (
            f"I think you want the {descriptor.name} service, but I could not tell "
            f"which numbers to use. Which numbers should {descriptor.name} "
            f"{'/'.join(allowed)} use?"
        )
        return None, question

    @staticmethod
    def _validate_binding(
        descriptor: ServiceDescriptor, reply: str
    ) -> tuple[list[BindingOp] | None, str]:
        parsed = _extract_json_list(reply)
        if parsed is None:
            return None, "no JSON list found in the reply"
        if not parsed:
            return None, "the JSON list was empty"
        operations: list[BindingOp] = []
        for item in parsed:
            if not isinstance(item, dict):
                return None, f"list item {item!r} is not an object"
            name = item.get("operation")
            proc = descriptor.procedure(name) if isinstance(name, str) else None
            if proc is None:
                return None, f"operation {name!r} is not one of {descriptor.operation_names()}"
            numbers = item.get("numbers")
            if (
                not isinstance(numbers, list)
                or not numbers
                or not all(
                    isinstance(n, (int, float)) and not isinstance(n, bool) for n in numbers
                )
            ):
                return None, f"'numbers' for {name} must be a non-empty list of numbers"
            if bind_arguments(proc, numbers) is None:
                return None, (
                    f"{len(numbers)} numbers do not fit the parameters of {name}"
                )
            operations.append(BindingOp(name, tuple(numbers)))
        return operations, ""
