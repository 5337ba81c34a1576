"""Trace collection and input-drift detection.

Every middleware component reports timestamped TraceEvents keyed by request
id; the store keeps a bounded number of requests (LRU) with a per-request
event cap. Drift detection is a label-free statistic over prompt embeddings:
cosine distance between the centroid of a live window and a frozen reference
centroid.
"""

from __future__ import annotations

import json
import threading
import time
from collections import OrderedDict, deque
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .embedding import is_zero


@dataclass
class TraceEvent:
    request_id: str
    component: str
    event: str
    started_at: float
    ended_at: float
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.ended_at < self.started_at:
            raise ValueError("ended_at precedes started_at")

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "component": self.component,
            "event": self.event,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "attributes": dict(self.attributes),
        }


class TraceStore:
    """Per-request append-only traces with global LRU eviction."""

    def __init__(self, request_capacity: int = 10_000, per_request_cap: int = 1_000):
        self._traces: OrderedDict[str, list[TraceEvent]] = OrderedDict()
        self._request_capacity = request_capacity
        self._per_request_cap = per_request_cap
        self._lock = threading.Lock()

    def record(self, event: TraceEvent) -> None:
        with self._lock:
            bucket = self._traces.get(event.request_id)
            if bucket is None:
                bucket = []
                self._traces[event.request_id] = bucket
                while len(self._traces) > self._request_capacity:
                    self._traces.popitem(last=False)
            else:
                self._traces.move_to_end(event.request_id)
            if len(bucket) < self._per_request_cap:
                bucket.append(event)

    def record_simple(self, request_id: str, component: str, event: str, attributes: dict) -> None:
        """Point-in-time event (started == ended)."""
        now = time.time()
        self.record(TraceEvent(request_id, component, event, now, now, dict(attributes)))

    def events_for(self, request_id: str) -> list[TraceEvent]:
        with self._lock:
            events = list(self._traces.get(request_id, ()))
        return sorted(events, key=lambda e: e.started_at)

    def request_ids(self) -> list[str]:
        with self._lock:
            return list(self._traces)

    def export_ndjson(self, request_id: str) -> str:
        return "\n".join(json.dumps(e.to_dict()) for e in self.events_for(request_id))

    @contextmanager
    def span(self, request_id: str, component: str, event: str, **attributes: str):
        """Record one timed event around a block; attributes may be extended
        via the yielded dict before the block exits."""
        attrs = {k: str(v) for k, v in attributes.items()}
        started = time.time()
        try:
            yield attrs
        finally:
            self.record(
                TraceEvent(
                    request_id=request_id,
                    component=component,
                    event=event,
                    started_at=started,
                    ended_at=time.time(),
                    attributes=attrs,
                )
            )


@dataclass
class DriftStatus:
    ok: bool
    alarmed: bool
    distance: float | None
    reason: str


class DriftDetector:
    """Centroid-cosine drift check over prompt embeddings.

    The reference centroid is the normalized mean of all reference vectors;
    the live side is a ring buffer of the last ``window`` embeddings. Alarm
    when 1 - cos(live centroid, reference centroid) exceeds the threshold.
    Zero vectors carry no signal and are skipped (counted).
    """

    def __init__(
        self,
        dimension: int,
        window: int = 200,
        threshold: float = 0.30,
        min_reference: int = 50,
        min_live: int | None = None,
    ):
        self.dimension = dimension
        self.threshold = threshold
        self.min_reference = min_reference
        # a live centroid over a handful of samples is noise, not drift
        self.min_live = min_reference if min_live is None else min_live
        self._reference_sum = np.zeros(dimension, dtype=np.float64)
        self.reference_count = 0
        self._live: deque[np.ndarray] = deque(maxlen=window)
        self.skipped_zero_vectors = 0
        self._lock = threading.Lock()
        self._last_status: DriftStatus | None = None

    def add_reference(self, vector: np.ndarray) -> None:
        if vector.shape != (self.dimension,):
            raise ValueError("reference vector has wrong dimension")
        with self._lock:
            if is_zero(vector):
                self.skipped_zero_vectors += 1
                return
            self._reference_sum += vector
            self.reference_count += 1

    def reference_centroid(self) -> np.ndarray:
        with self._lock:
            return self._centroid_locked(self._reference_sum, self.reference_count)

    @staticmethod
    def _centroid_locked(total: np.ndarray, count: int) -> np.ndarray:
        if count == 0:
            return np.zeros_like(total)
        mean = total / count
        norm = np.linalg.norm(mean)
        return mean / norm if norm > 0 else mean

    def drift_check(self, vector: np.ndarray) -> DriftStatus:
        if vector.shape != (self.dimension,):
            raise ValueError("vector has wrong dimension")
        with self._lock:
            if is_zero(vector):
                self.skipped_zero_vectors += 1
                return self._status(ok=True, alarmed=False, distance=None, reason="zero-vector-skipped")
            self._live.append(np.array(vector, dtype=np.float64))
            if self.reference_count < self.min_reference:
                return self._status(ok=True, alarmed=False, distance=None, reason="insufficient-reference")
            if len(self._live) < self.min_live:
                return self._status(ok=True, alarmed=False, distance=None, reason="live-window-warming")
            ref = self._centroid_locked(self._reference_sum, self.reference_count)
            live = self._centroid_locked(
                np.sum(np.stack(list(self._live)), axis=0), len(self._live)
            )
            distance = 1.0 - float(np.dot(ref, live))
            if distance > self.threshold:
                return self._status(ok=False, alarmed=True, distance=distance, reason="drift")
            return self._status(ok=True, alarmed=False, distance=distance, reason="in-distribution")

    def _status(self, ok: bool, alarmed: bool, distance: float | None, reason: str) -> DriftStatus:
        status = DriftStatus(ok=ok, alarmed=alarmed, distance=distance, reason=reason)
        self._last_status = status
        return status

    def snapshot(self) -> dict:
        with self._lock:
            last = self._last_status
            return {
                "reference_count": self.reference_count,
                "live_window": len(self._live),
                "min_live": self.min_live,
                "threshold": self.threshold,
                "skipped_zero_vectors": self.skipped_zero_vectors,
                "distance": last.distance if last else None,
                "alarmed": bool(last.alarmed) if last else False,
                "reason": last.reason if last else "no-samples",
            }
