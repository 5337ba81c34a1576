"""Request scheduling across model workers.

Each worker owns a strict FIFO queue and a memory budget for resident
models. Sessions stick to the worker that served them first (their KV state
lives there), models evict least-recently-used under memory pressure, and
`estimate_session_bytes` gives the per-class session memory cost that makes
those budgets meaningful.
"""

from __future__ import annotations

import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass, field

from .errors import (
    DuplicateRequestError,
    ModelTooLargeError,
    UnknownModelClassError,
    UnknownWorkerError,
)
from .tracing import TraceEvent, TraceStore

# Estimated session memory per context token, by model class.
BYTES_PER_TOKEN = {
    "13B": 800_000,
    "70B": 4_300_000,
}


def estimate_session_bytes(model_class: str, context_tokens: int) -> int:
    """Session memory estimate: per-token cost for the class times context."""
    if model_class not in BYTES_PER_TOKEN:
        raise UnknownModelClassError(
            f"unknown model class {model_class!r} (known: {sorted(BYTES_PER_TOKEN)})"
        )
    if not isinstance(context_tokens, int) or context_tokens < 0:
        raise ValueError(f"context_tokens must be a non-negative int, got {context_tokens!r}")
    return BYTES_PER_TOKEN[model_class] * context_tokens


@dataclass
class ScheduledRequest:
    request_id: str
    session_id: str
    model_class: str
    context_tokens: int = 0
    submitted_at: float = field(default_factory=time.time)


@dataclass
class Worker:
    worker_id: str
    worker_class: str
    memory_budget_bytes: int
    resident: OrderedDict = field(default_factory=OrderedDict)  # model -> bytes, LRU first
    queue: deque = field(default_factory=deque)
    running: ScheduledRequest | None = None

    @property
    def resident_bytes(self) -> int:
        return sum(self.resident.values())


class FifoScheduler:
    """FIFO-per-worker scheduler with sticky sessions and model LRU.

    session_permissions, when given, maps a session_id to the set of model
    classes that session's certificate allows; submit refuses anything else.
    """

    def __init__(self, session_permissions=None, traces: TraceStore | None = None):
        self._workers: dict[str, Worker] = {}
        self._sticky: dict[str, str] = {}
        self._by_request: dict[str, str] = {}  # request_id -> worker_id
        self._session_permissions = session_permissions
        self._traces = traces
        self._cond = threading.Condition()

    # -- worker pool --------------------------------------------------------

    def add_worker(self, worker_id: str, worker_class: str, memory_budget_bytes: int) -> None:
        if worker_class not in BYTES_PER_TOKEN:
            raise UnknownModelClassError(f"unknown model class {worker_class!r}")
        with self._cond:
            if worker_id in self._workers:
                raise DuplicateRequestError(f"worker {worker_id!r} already exists")
            self._workers[worker_id] = Worker(worker_id, worker_class, memory_budget_bytes)
            self._cond.notify_all()

    def remove_worker(self, worker_id: str) -> list[ScheduledRequest]:
        """Drop a worker; orphaned requests are reassigned in arrival order."""
        with self._cond:
            worker = self._workers.pop(worker_id, None)
            if worker is None:
                raise UnknownWorkerError(f"no worker {worker_id!r}")
            orphans = list(worker.queue)
            if worker.running is not None:
                orphans.insert(0, worker.running)
            for request in orphans:
                self._by_request.pop(request.request_id, None)
            self._sticky = {s: w for s, w in self._sticky.items() if w != worker_id}
            self._cond.notify_all()
        reassigned = []
        for request in orphans:
            try:
                self.submit(request)
                reassigned.append(request)
            except UnknownModelClassError:
                pass  # no remaining worker of that class; caller sees it in the return
        return reassigned

    def workers(self) -> list[str]:
        with self._cond:
            return sorted(self._workers)

    # -- queueing ----------------------------------------------------------

    def submit(self, request: ScheduledRequest) -> int:
        """Queue a request on its preferred worker; returns 1-based position."""
        if self._session_permissions is not None:
            allowed = self._session_permissions(request.session_id)
            if request.model_class not in allowed:
                raise PermissionError(
                    f"session {request.session_id!r} may not use model class "
                    f"{request.model_class!r}"
                )
        with self._cond:
            if request.request_id in self._by_request:
                raise DuplicateRequestError(f"request {request.request_id!r} already queued")
            worker = self._pick_worker(request)
            worker.queue.append(request)
            self._by_request[request.request_id] = worker.worker_id
            self._sticky[request.session_id] = worker.worker_id
            position = len(worker.queue) + (1 if worker.running is not None else 0)
            self._cond.notify_all()
        if self._traces is not None:
            now = time.time()
            self._traces.record(
                TraceEvent(
                    request_id=request.request_id,
                    component="scheduler",
                    event="submit",
                    started_at=now,
                    ended_at=now,
                    attributes={"worker": worker.worker_id, "position": position},
                )
            )
        return position

    def _pick_worker(self, request: ScheduledRequest) -> Worker:
        eligible = [
            w for w in self._workers.values() if w.worker_class == request.model_class
        ]
        if not eligible:
            raise UnknownModelClassError(
                f"no worker hosts model class {request.model_class!r}"
            )
        sticky_id = self._sticky.get(request.session_id)
        if sticky_id is not None:
            sticky = self._workers.get(sticky_id)
            if sticky is not None and sticky.worker_class == request.model_class:
                return sticky
        # Cold workers pay a model load; prefer warm, then short queues.
        eligible.sort(
            key=lambda w: (
                0 if w.resident else 1,
                len(w.queue) + (1 if w.running is not None else 0),
                w.worker_id,
            )
        )
        return eligible[0]

    def dispatch(self, worker_id: str) -> ScheduledRequest | None:
        """Pop the head of a worker's queue if the worker is idle."""
        with self._cond:
            worker = self._require_worker(worker_id)
            if worker.running is not None or not worker.queue:
                return None
            worker.running = worker.queue.popleft()
            return worker.running

    def acquire(self, request_id: str, timeout: float | None = None) -> ScheduledRequest:
        """Block until the request reaches the head of its queue and the
        worker is idle, then claim the worker. Pair with complete()."""
        deadline = None if timeout is None else time.time() + timeout
        with self._cond:
            while True:
                worker_id = self._by_request.get(request_id)
                if worker_id is None:
                    raise UnknownWorkerError(f"request {request_id!r} is not queued")
                worker = self._workers.get(worker_id)
                if worker is None:
                    raise UnknownWorkerError(f"worker {worker_id!r} vanished")
                if (
                    worker.running is None
                    and worker.queue
                    and worker.queue[0].request_id == request_id
                ):
                    worker.running = worker.queue.popleft()
                    return worker.running
                remaining = None if deadline is None else deadline - time.time()
                if remaining is not None and remaining <= 0:
                    raise TimeoutError(f"request {request_id!r} never reached the head")
                self._cond.wait(remaining)

    def complete(self, request_id: str) -> None:
        with self._cond:
            worker_id = self._by_request.pop(request_id, None)
            if worker_id is None:
                return
            worker = self._workers.get(worker_id)
            if worker is not None and worker.running is not None:
                if worker.running.request_id == request_id:
                    worker.running = None
            self._cond.notify_all()

    def cancel(self, request_id: str) -> bool:
        """Remove a queued (not running) request. True if something was removed."""
        with self._cond:
            worker_id = self._by_request.get(request_id)
            if worker_id is None:
                return False
            worker = self._workers.get(worker_id)
            if worker is None:
                self._by_request.pop(request_id, None)
                return False
            for queued in list(worker.queue):
                if queued.request_id == request_id:
                    worker.queue.remove(queued)
                    self._by_request.pop(request_id, None)
                    self._cond.notify_all()
                    return True
            return False

    # -- model residency -----------------------------------------------------

    def load_model(self, worker_id: str, model_name: str, size_bytes: int) -> list[str]:
        """Make a model resident, evicting LRU models as needed.

        Returns the names evicted. A model larger than the whole budget is
        refused rather than thrashing the worker empty.
        """
        with self._cond:
            worker = self._require_worker(worker_id)
            if size_bytes > worker.memory_budget_bytes:
                raise ModelTooLargeError(
                    f"{model_name!r} needs {size_bytes} bytes; {worker_id!r} "
                    f"budget is {worker.memory_budget_bytes}"
                )
            if model_name in worker.resident:
                worker.resident.move_to_end(model_name)
                return []
            evicted = []
            while worker.resident_bytes + size_bytes > worker.memory_budget_bytes:
                name, _ = worker.resident.popitem(last=False)
                evicted.append(name)
            worker.resident[model_name] = size_bytes
        if self._traces is not None and evicted:
            now = time.time()
            self._traces.record(
                TraceEvent(
                    request_id="-",
                    component="scheduler",
                    event="evict_models",
                    started_at=now,
                    ended_at=now,
                    attributes={"worker": worker_id, "evicted": evicted},
                )
            )
        return evicted

    def touch_model(self, worker_id: str, model_name: str) -> None:
        with self._cond:
            worker = self._require_worker(worker_id)
            if model_name in worker.resident:
                worker.resident.move_to_end(model_name)

    def _require_worker(self, worker_id: str) -> Worker:
        worker = self._workers.get(worker_id)
        if worker is None:
            raise UnknownWorkerError(f"no worker {worker_id!r}")
        return worker

    # -- introspection -----------------------------------------------------

    def snapshot(self) -> dict:
        with self._cond:
            return {
                "workers": [
                    {
                        "worker_id": w.worker_id,
                        "worker_class": w.worker_class,
                        "memory_budget_bytes": w.memory_budget_bytes,
                        "resident_bytes": w.resident_bytes,
                        "resident_models": list(w.resident),
                        "running": w.running.request_id if w.running else None,
                        "queued": [r.request_id for r in w.queue],
                    }
                    for w in sorted(self._workers.values(), key=lambda w: w.worker_id)
                ],
                "sticky_sessions": dict(self._sticky),
            }
