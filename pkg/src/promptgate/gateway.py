"""The gateway: one front door from an authenticated prompt to an answer.

handle_chat glues the pipeline together: authenticate, consult the response
cache, route under the caller's certificate, schedule onto a worker, run the
execution graph, and record every hop as trace events. Requests that need a
human answer park as awaiting_user and continue through resume().
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import threading
import time
from collections import OrderedDict

from .backends import make_backend
from .caching import PromptCache, SessionStore
from .config import GatewayConfig
from .embedding import embed, tokenize
from .errors import ResumeError, UnknownUserError
from .execution import AWAITING, Executor, GraphStore, SUCCEEDED
from .routing import Router, RoutingDecision
from .scheduling import FifoScheduler, ScheduledRequest, estimate_session_bytes
from .services import ServiceDescriptor, ServiceRegistry, ServiceTransport
from .tracing import DriftDetector, TraceStore
from .users import AccessCertificate, UserRegistry

log = logging.getLogger(__name__)

# Nominal resident sizes used for worker memory accounting (fp16 weights).
MODEL_NOMINAL_BYTES = {
    "13B": 26_000_000_000,
    "70B": 140_000_000_000,
}


class Gateway:
    def __init__(
        self,
        config: GatewayConfig | None = None,
        transport: ServiceTransport | None = None,
    ):
        self.config = config or GatewayConfig()
        self.traces = TraceStore()
        self.users = UserRegistry(self.config.users_path, self.traces)
        self.services = ServiceRegistry(
            path=self.config.services_path,
            transport=transport,
            traces=self.traces,
            invoke_timeout_s=self.config.invoke_timeout_s,
        )
        self.backend = make_backend(self.config.backend, self.traces)
        self.router = Router(self.services, self.backend, self.config.router, self.traces)
        self.services.subscribe(self.router.rebuild)
        self.scheduler = FifoScheduler(
            session_permissions=self._session_classes, traces=self.traces
        )
        for worker in self.config.workers:
            self.scheduler.add_worker(
                worker.worker_id, worker.worker_class, worker.memory_budget_bytes
            )
        self.cache = PromptCache(
            capacity=self.config.cache.capacity,
            similarity_threshold=self.config.cache.similarity_threshold,
            dimension=self.config.router.dimension,
            enabled=self.config.cache.enabled,
        )
        self.sessions = SessionStore(self.config.sessions.budget_bytes)
        self.drift = DriftDetector(
            dimension=self.config.router.dimension,
            window=self.config.drift.window,
            threshold=self.config.drift.threshold,
            min_reference=self.config.drift.min_reference,
        )
        self.executor = Executor(
            self.services,
            self.backend,
            traces=self.traces,
            config=self.config.executor,
            binder=self.router.extract_parameters,
        )
        self.graphs = GraphStore(ttl_s=self.config.executor.awaiting_ttl_s)
        self._session_owner: dict[str, str] = {}  # session_key -> user_id
        self._counters: dict[str, int] = {}
        self._request_meta: OrderedDict[str, dict] = OrderedDict()
        self._lock = threading.RLock()
        self._backend_fp = hashlib.blake2b(
            json.dumps(dataclasses.asdict(self.config.backend), sort_keys=True).encode(),
            digest_size=6,
        ).hexdigest()

    # -- administration ------------------------------------------------------

    def add_user(
        self,
        user_id: str,
        allowed_services: list[str],
        allowed_worker_classes: list[str],
    ) -> str:
        """Register a user; returns the generated auth key (shown once)."""
        certificate = AccessCertificate.of(allowed_services, allowed_worker_classes)
        return self.users.register_user(user_id, certificate).auth_key

    def register_service(self, descriptor: ServiceDescriptor) -> None:
        self.services.register(descriptor)

    # -- chat pipeline -----------------------------------------------------------

    def handle_chat(self, auth_key: str, session_id: str, prompt: str) -> dict:
        user = self.users.authenticate(auth_key)
        session_key = f"{user.user_id}:{session_id}"
        request_id = self._next_request_id(user.user_id, session_id)
        started = time.time()
        with self.traces.span(request_id, "gateway", "chat") as span_attrs:
            span_attrs["user"] = user.user_id
            span_attrs["session"] = session_id
            response = self._chat(user, session_key, session_id, request_id, prompt)
            span_attrs["status"] = response["status"]
            span_attrs["cache_hit"] = response["cache_hit"]
        response["elapsed_s"] = round(time.time() - started, 6)
        self._remember(request_id, user.user_id, session_key, response)
        return response

    def _chat(self, user, session_key: str, session_id: str, request_id: str, prompt: str) -> dict:
        if not prompt or not prompt.strip():
            return self._response(request_id, session_id, "error", error="empty prompt")
        with self._lock:
            self._session_owner[session_key] = user.user_id
        self.sessions.append(session_key, "user", prompt)
        self._observe_drift(request_id, prompt)

        scope = self._cache_scope(user)
        hit = self.cache.lookup(scope, prompt)
        now = time.time()
        if hit is not None:
            self.traces.record_simple(
                request_id,
                "cache",
                "hit",
                {"similarity": round(hit.similarity, 6), "exact": hit.exact},
            )
            answer = hit.payload["text"]
            self.sessions.append(session_key, "assistant", answer)
            return self._response(
                request_id,
                session_id,
                "ok",
                answer=answer,
                routing=hit.payload.get("routing"),
                cache_hit=True,
            )
        self.traces.record_simple(request_id, "cache", "miss", {})

        decision = self.router.route(
            prompt, set(user.certificate.allowed_services), request_id
        )
        model_class = self._model_class_for(decision, user.certificate)
        if model_class is None:
            return self._response(
                request_id, session_id, "error",
                routing=decision.to_dict(),
                error="no worker class available to this user",
            )
        context_tokens = sum(
            len(tokenize(turn.text)) for turn in self.sessions.history(session_key)
        )
        request = ScheduledRequest(request_id, session_key, model_class, context_tokens)
        try:
            position = self.scheduler.submit(request)
        except PermissionError as exc:
            return self._response(
                request_id, session_id, "error",
                routing=decision.to_dict(), error=str(exc),
            )
        self.scheduler.acquire(request_id, timeout=60.0)
        try:
            worker_id = self._worker_running(request_id)
            self._ensure_model(worker_id, model_class)
            self.traces.record_simple(
                request_id,
                "scheduler",
                "grant",
                {
                    "worker": worker_id,
                    "position_at_submit": position,
                    "session_bytes_estimate": estimate_session_bytes(
                        model_class, context_tokens
                    ),
                },
            )
            graph = self.executor.plan(request_id, prompt, decision)
            self.graphs.put(graph)
            graph = self.executor.run(graph, set(user.certificate.allowed_services))
        finally:
            self.scheduler.complete(request_id)

        if graph.status == SUCCEEDED:
            answer = graph.answer or ""
            self.cache.put(scope, prompt, {"text": answer, "routing": decision.to_dict()})
            self.sessions.append(session_key, "assistant", answer)
            return self._response(
                request_id, session_id, "ok",
                answer=answer, routing=decision.to_dict(), worker=worker_id,
            )
        if graph.status == AWAITING:
            question = graph.clarification_question or "Can you clarify?"
            self.sessions.append(session_key, "assistant", question)
            return self._response(
                request_id, session_id, "awaiting_user",
                routing=decision.to_dict(),
                clarification_question=question,
                worker=worker_id,
            )
        return self._response(
            request_id, session_id, "error",
            routing=decision.to_dict(),
            error=graph.error or "execution failed",
            worker=worker_id,
        )

    def resume(self, auth_key: str, request_id: str, reply: str) -> dict:
        """Answer a pending clarification; the graph picks up where it parked."""
        user = self.users.authenticate(auth_key)
        meta = self._request_meta.get(request_id)
        if meta is None:
            raise KeyError(f"unknown request {request_id!r}")
        if meta["user_id"] != user.user_id:
            raise PermissionError("request belongs to another user")
        graph = self.graphs.get(request_id)
        if graph is None:
            raise KeyError(f"request {request_id!r} has no execution graph")
        with self.traces.span(request_id, "gateway", "resume") as span_attrs:
            graph = self.executor.resume(
                graph, reply, set(user.certificate.allowed_services)
            )
            span_attrs["status"] = graph.status
        session_key = meta["session_key"]
        self.sessions.append(session_key, "user", reply)
        session_id = session_key.split(":", 1)[1]
        if graph.status == SUCCEEDED:
            answer = graph.answer or ""
            self.sessions.append(session_key, "assistant", answer)
            # resumed answers depend on the extra reply, so they skip the cache
            response = self._response(
                request_id, session_id, "ok",
                answer=answer, routing=meta["response"].get("routing"),
            )
        else:
            response = self._response(
                request_id, session_id, "error",
                routing=meta["response"].get("routing"),
                error=graph.error or "execution failed",
            )
        self._remember(request_id, user.user_id, session_key, response)
        return response

    # -- lookups ---------------------------------------------------------------

    def describe_request(self, auth_key: str, request_id: str) -> dict:
        user = self.users.authenticate(auth_key)
        meta = self._request_meta.get(request_id)
        if meta is None:
            raise KeyError(f"unknown request {request_id!r}")
        if meta["user_id"] != user.user_id:
            raise PermissionError("request belongs to another user")
        graph = self.graphs.get(request_id)
        return {
            "request": meta["response"],
            "graph": graph.to_dict() if graph is not None else None,
        }

    def trace_events(self, request_id: str) -> list[dict]:
        return [event.to_dict() for event in self.traces.events_for(request_id)]

    def admin_scheduler(self) -> dict:
        return self.scheduler.snapshot()

    def admin_cache(self) -> dict:
        return {"prompt_cache": self.cache.stats(), "sessions": self.sessions.stats()}

    def admin_drift(self) -> dict:
        return self.drift.snapshot()

    def debug_index(self) -> dict:
        return {
            "dimension": self.router.index.dimension,
            "entries": [
                {"service": entry.service, "utterance": entry.utterance}
                for entry in self.router.index.entries()
            ],
        }

    def health(self) -> dict:
        return {
            "status": "ok",
            "services": len(self.services.list_services()),
            "workers": self.scheduler.workers(),
            "backend": self.config.backend.kind,
        }

    # -- internals -----------------------------------------------------------

    def _next_request_id(self, user_id: str, session_id: str) -> str:
        with self._lock:
            key = f"{user_id}:{session_id}"
            self._counters[key] = self._counters.get(key, 0) + 1
            return f"req-{user_id}-{session_id}-{self._counters[key]:04d}"

    def _cache_scope(self, user) -> str:
        cert = user.certificate
        cert_fp = hashlib.blake2b(
            json.dumps(
                [sorted(cert.allowed_services), sorted(cert.allowed_worker_classes)]
            ).encode(),
            digest_size=6,
        ).hexdigest()
        return f"{user.user_id}|{cert_fp}|v{self.services.version}|{self._backend_fp}"

    def _session_classes(self, session_key: str):
        owner = self._session_owner.get(session_key)
        if owner is None:
            return frozenset()
        try:
            record = self.users.get(owner)
        except UnknownUserError:
            return frozenset()
        return record.certificate.allowed_worker_classes

    def _model_class_for(self, decision: RoutingDecision, certificate) -> str | None:
        if not decision.abstained and decision.service is not None:
            # routed requests run on the class the service descriptor pins;
            # the scheduler still rejects it if the certificate disagrees
            return self.services.get(decision.service).worker_class
        classes = {w.worker_class for w in self.config.workers}
        # direct answers are not pinned, so pick a class the user may use
        permitted = {c for c in classes if certificate.permits_worker_class(c)}
        pool = permitted or classes
        for preferred in ("13B", "70B"):
            if preferred in pool:
                return preferred
        return next(iter(sorted(pool)), None)

    def _worker_running(self, request_id: str) -> str:
        for worker in self.scheduler.snapshot()["workers"]:
            if worker["running"] == request_id:
                return worker["worker_id"]
        return "?"

    def _ensure_model(self, worker_id: str, model_class: str) -> None:
        if worker_id == "?":
            return
        name = f"model-{model_class}"
        size = MODEL_NOMINAL_BYTES.get(model_class, 1)
        self.scheduler.load_model(worker_id, name, size)

    def _observe_drift(self, request_id: str, prompt: str) -> None:
        # digits are content-free for topic drift and act like an unbounded
        # vocabulary, so they stay out of the monitored distribution
        words = " ".join(t for t in tokenize(prompt) if not t.isdigit())
        vector = embed(words, self.config.router.dimension)
        if self.drift.reference_count < self.config.drift.min_reference:
            self.drift.add_reference(vector)
            return
        status = self.drift.drift_check(vector)
        if status.alarmed:
            log.warning("input drift alarm: %s", status.reason)
            self.traces.record_simple(
                request_id,
                "drift",
                "alarm",
                {"distance": round(status.distance, 6), "reason": status.reason},
            )

    def _remember(self, request_id: str, user_id: str, session_key: str, response: dict) -> None:
        with self._lock:
            self._request_meta[request_id] = {
                "user_id": user_id,
                "session_key": session_key,
                "response": response,
            }
            while len(self._request_meta) > 10_000:
                self._request_meta.popitem(last=False)

    @staticmethod
    def _response(
        request_id: str,
        session_id: str,
        status: str,
        answer: str | None = None,
        routing: dict | None = None,
        clarification_question: str | None = None,
        error: str | None = None,
        cache_hit: bool = False,
        worker: str | None = None,
    ) -> dict:
        return {
            "request_id": request_id,
            "session_id": session_id,
            "status": status,
            "answer": answer,
            "routing": routing,
            "clarification_question": clarification_question,
            "error": error,
            "cache_hit": cache_hit,
            "worker": worker,
        }
