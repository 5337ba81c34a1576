"""Caching layers: a semantic response cache and a bounded session store.

The response cache answers repeated (or near-duplicate) prompts without
touching the router, scheduler, or any service. Entries are scoped: the
scope key bakes in the user and the service-configuration fingerprint, so
one user's cached answers can never leak to another user or survive a
registry change. The session store keeps per-session chat history under a
global byte budget with whole-session LRU eviction.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any

import numpy as np

from .embedding import DEFAULT_DIMENSION, cosine, embed, is_zero


@dataclass
class CacheEntry:
    scope: str
    prompt: str
    vector: np.ndarray
    payload: Any


@dataclass
class CacheHit:
    payload: Any
    similarity: float
    cached_prompt: str
    exact: bool


class PromptCache:
    """Scope-isolated semantic cache with global LRU capacity.

    A lookup hits when a same-scope entry matches the prompt exactly, or
    embeds within `similarity_threshold` cosine of it. Lookups refresh
    recency; inserts evict the globally least-recently-used entry once
    `capacity` is reached.
    """

    def __init__(
        self,
        capacity: int = 10_000,
        similarity_threshold: float = 0.95,
        dimension: int = DEFAULT_DIMENSION,
        enabled: bool = True,
    ):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if not 0.0 < similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in (0, 1]")
        self.capacity = capacity
        self.enabled = enabled
        self.similarity_threshold = similarity_threshold
        self.dimension = dimension
        self._entries: OrderedDict[tuple[str, str], CacheEntry] = OrderedDict()
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def lookup(self, scope: str, prompt: str) -> CacheHit | None:
        if not self.enabled:
            return None
        with self._lock:
            exact_key = (scope, prompt)
            entry = self._entries.get(exact_key)
            if entry is not None:
                self._entries.move_to_end(exact_key)
                self.hits += 1
                return CacheHit(entry.payload, 1.0, entry.prompt, exact=True)
            query = embed(prompt, self.dimension)
            if not is_zero(query):
                best_key, best_entry, best_sim = None, None, 0.0
                for key, candidate in self._entries.items():
                    if candidate.scope != scope:
                        continue
                    similarity = cosine(query, candidate.vector)
                    # >= so later entries win ties: freshest equally-good answer
                    if similarity >= self.similarity_threshold and similarity >= best_sim:
                        best_key, best_entry, best_sim = key, candidate, similarity
                if best_entry is not None:
                    self._entries.move_to_end(best_key)
                    self.hits += 1
                    return CacheHit(best_entry.payload, best_sim, best_entry.prompt, exact=False)
            self.misses += 1
            return None

    def put(self, scope: str, prompt: str, payload: Any) -> None:
        if not self.enabled or not prompt:
            return
        with self._lock:
            key = (scope, prompt)
            self._entries[key] = CacheEntry(scope, prompt, embed(prompt, self.dimension), payload)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
                self.evictions += 1

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def stats(self) -> dict:
        with self._lock:
            scopes: dict[str, int] = {}
            for entry in self._entries.values():
                scopes[entry.scope] = scopes.get(entry.scope, 0) + 1
            return {
                "entries": len(self._entries),
                "capacity": self.capacity,
                "similarity_threshold": self.similarity_threshold,
                "hits": self.hits,
                "misses": self.misses,
                "evictions": self.evictions,
                "scopes": scopes,
            }


@dataclass
class SessionTurn:
    role: str
    text: str

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text}


class SessionStore:
    """Per-session history under one global byte budget.

    Whole sessions evict least-recently-used first. A session that alone
    overflows the budget sheds its oldest turns instead of being dropped
    mid-conversation.
    """

    def __init__(self, budget_bytes: int = 64 * 1024 * 1024):
        if budget_bytes < 1:
            raise ValueError("budget_bytes must be positive")
        self.budget_bytes = budget_bytes
        self._sessions: OrderedDict[str, list[SessionTurn]] = OrderedDict()
        self._bytes: dict[str, int] = {}
        self._lock = threading.RLock()
        self.evicted_sessions = 0

    @staticmethod
    def _cost(turn: SessionTurn) -> int:
        return len(turn.role.encode("utf-8")) + len(turn.text.encode("utf-8"))

    def append(self, session_id: str, role: str, text: str) -> None:
        turn = SessionTurn(role, text)
        with self._lock:
            turns = self._sessions.setdefault(session_id, [])
            self._sessions.move_to_end(session_id)
            turns.append(turn)
            self._bytes[session_id] = self._bytes.get(session_id, 0) + self._cost(turn)
            self._shrink(keep=session_id)

    def _shrink(self, keep: str) -> None:
        while self.total_bytes() > self.budget_bytes and len(self._sessions) > 1:
            victim = next(iter(self._sessions))
            if victim == keep:
                # keep is oldest but still active; evict the next one instead
                ids = iter(self._sessions)
                next(ids)
                victim = next(ids)
            del self._sessions[victim]
            del self._bytes[victim]
            self.evicted_sessions += 1
        # a single oversized session trims from its own oldest turns
        turns = self._sessions.get(keep)
        while turns and self._bytes.get(keep, 0) > self.budget_bytes and len(turns) > 1:
            dropped = turns.pop(0)
            self._bytes[keep] -= self._cost(dropped)

    def history(self, session_id: str) -> list[SessionTurn]:
        with self._lock:
            turns = self._sessions.get(session_id)
            if turns is None:
                return []
            self._sessions.move_to_end(session_id)
            return list(turns)

    def turn_count(self, session_id: str) -> int:
        with self._lock:
            return len(self._sessions.get(session_id, ()))

    def total_bytes(self) -> int:
        return sum(self._bytes.values())

    def session_ids(self) -> list[str]:
        with self._lock:
            return list(self._sessions)

    def stats(self) -> dict:
        with self._lock:
            return {
                "sessions": len(self._sessions),
                "total_bytes": self.total_bytes(),
                "budget_bytes": self.budget_bytes,
                "evicted_sessions": self.evicted_sessions,
            }
