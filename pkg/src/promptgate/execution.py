"""Execution graphs: plan a routed request, run it, pause for humans.

A routing decision becomes a small dependency graph: a binding node (already
satisfied when extraction worked, a clarification gate when it did not),
one service call per bound operation, and a presentation node that turns
raw results into the reply. run() executes ready nodes for a bounded number
of sweeps, so every graph terminates in succeeded, failed, or awaiting_user.
Parked graphs resume when the user answers, with a freshness TTL.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .backends import direct_prompt, extract_arithmetic, presentation_prompt
from .errors import PlanningError, ResumeError
from .routing import BindingOp, RoutingDecision, bind_arguments
from .services import ServiceRegistry
from .tracing import TraceEvent, TraceStore

_NUMBER = re.compile(r"\b\d+\b")

PENDING = "pending"
DONE = "done"
FAILED = "failed"
AWAITING = "awaiting_user"

RUNNING = "running"
SUCCEEDED = "succeeded"
GRAPH_FAILED = "failed"


@dataclass
class Node:
    node_id: str
    kind: str  # llm_call | service_call | user_clarification
    payload: dict
    depends_on: list[str] = field(default_factory=list)
    status: str = PENDING
    result: object = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "kind": self.kind,
            "payload": self.payload,
            "depends_on": list(self.depends_on),
            "status": self.status,
            "result": self.result,
            "error": self.error,
        }


@dataclass
class ExecutionGraph:
    request_id: str
    prompt: str
    service: str | None
    nodes: dict[str, Node]
    status: str = RUNNING
    answer: str | None = None
    error: str | None = None
    clarification_question: str | None = None
    created_at: float = field(default_factory=time.time)
    awaiting_since: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def node_list(self) -> list[Node]:
        return list(self.nodes.values())

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "prompt": self.prompt,
            "service": self.service,
            "status": self.status,
            "answer": self.answer,
            "error": self.error,
            "clarification_question": self.clarification_question,
            "nodes": [n.to_dict() for n in self.nodes.values()],
        }


@dataclass(frozen=True)
class ExecutorConfig:
    max_iterations: int = 8
    awaiting_ttl_s: float = 30 * 60.0


class Executor:
    """Plans and drives execution graphs against the registry and backend.

    `binder`, when present, is an LLM-backed (descriptor, prompt) ->
    (operations, clarification) callable used as a fallback while resuming;
    the primary resume path parses the user's reply directly so it works
    even when the model is down.
    """

    def __init__(
        self,
        registry: ServiceRegistry,
        backend,
        traces: TraceStore | None = None,
        config: ExecutorConfig | None = None,
        binder: Callable | None = None,
    ):
        self.registry = registry
        self.backend = backend
        self.config = config or ExecutorConfig()
        self._traces = traces
        self._binder = binder

    # -- planning ------------------------------------------------------------

    def plan(self, request_id: str, prompt: str, decision: RoutingDecision) -> ExecutionGraph:
        if decision.abstained:
            nodes = {
                "n1": Node("n1", "llm_call", {"purpose": "direct", "prompt": prompt}),
            }
            graph = ExecutionGraph(request_id, prompt, None, nodes)
        elif decision.operations is not None:
            nodes: dict[str, Node] = {
                "n1": Node(
                    "n1",
                    "llm_call",
                    {"purpose": "binding", "service": decision.service},
                    status=DONE,
                    result=[op.to_dict() for op in decision.operations],
                )
            }
            call_ids = []
            descriptor = self.registry.get(decision.service)
            for op in decision.operations:
                proc = descriptor.procedure(op.operation)
                if proc is None:
                    raise PlanningError(
                        f"{decision.service} has no procedure {op.operation!r}"
                    )
                arguments = bind_arguments(proc, list(op.numbers))
                if arguments is None:
                    raise PlanningError(
                        f"operands do not fit {decision.service}.{op.operation}"
                    )
                node_id = f"n{len(nodes) + 1}"
                nodes[node_id] = Node(
                    node_id,
                    "service_call",
                    {
                        "service": decision.service,
                        "procedure": op.operation,
                        "arguments": arguments,
                    },
                    depends_on=["n1"],
                )
                call_ids.append(node_id)
            present_id = f"n{len(nodes) + 1}"
            nodes[present_id] = Node(
                present_id,
                "llm_call",
                {"purpose": "presentation", "prompt": prompt},
                depends_on=call_ids,
            )
            graph = ExecutionGraph(request_id, prompt, decision.service, nodes)
        else:
            # extraction needs the user; gate the call chain on a clarification
            nodes = {
                "n1": Node(
                    "n1",
                    "user_clarification",
                    {"question": decision.clarification_question},
                    status=AWAITING,
                ),
                "n2": Node(
                    "n2",
                    "service_call",
                    {"service": decision.service, "procedure": None, "arguments": None},
                    depends_on=["n1"],
                ),
                "n3": Node(
                    "n3",
                    "llm_call",
                    {"purpose": "presentation", "prompt": prompt},
                    depends_on=["n2"],
                ),
            }
            graph = ExecutionGraph(
                request_id,
                prompt,
                decision.service,
                nodes,
                clarification_question=decision.clarification_question,
            )
        self._record(graph, "plan", {"nodes": len(graph.nodes), "service": graph.service})
        return graph

    # -- running ------------------------------------------------------------

    def run(
        self, graph: ExecutionGraph, allowed_services: set[str] | None = None
    ) -> ExecutionGraph:
        """Sweep ready nodes until the graph reaches a terminal status.

        The sweep count is capped, so a malformed graph fails instead of
        spinning. allowed_services re-checks every service call against the
        caller's certificate at the moment of dispatch.
        """
        for _ in range(self.config.max_iterations):
            if graph.status != RUNNING:
                return graph
            ready = [
                node
                for node in graph.nodes.values()
                if node.status == PENDING
                and all(graph.nodes[dep].status == DONE for dep in node.depends_on)
            ]
            if not ready:
                self._settle_stalled(graph)
                return graph
            for node in ready:
                self._execute(graph, node, allowed_services)
                if graph.status != RUNNING:
                    return graph
            if all(node.status == DONE for node in graph.nodes.values()):
                graph.status = SUCCEEDED
                self._record(graph, "graph_done", {"answer": graph.answer})
                return graph
        graph.status = GRAPH_FAILED
        graph.error = "unresolved: iteration budget exhausted"
        self._record(graph, "graph_failed", {"error": graph.error})
        return graph

    def _settle_stalled(self, graph: ExecutionGraph) -> None:
        if any(node.status == AWAITING for node in graph.nodes.values()):
            graph.status = AWAITING
            graph.awaiting_since = time.time()
            self._record(graph, "await_user", {"question": graph.clarification_question})
        elif all(node.status == DONE for node in graph.nodes.values()):
            graph.status = SUCCEEDED
            self._record(graph, "graph_done", {"answer": graph.answer})
        else:
            graph.status = GRAPH_FAILED
            graph.error = "stalled: no runnable nodes"
            self._record(graph, "graph_failed", {"error": graph.error})

    def _execute(
        self, graph: ExecutionGraph, node: Node, allowed_services: set[str] | None
    ) -> None:
        started = time.time()
        node.status = "running"
        try:
            if node.kind == "llm_call":
                self._run_llm(graph, node)
            elif node.kind == "service_call":
                self._run_service(graph, node, allowed_services)
            else:
                raise PlanningError(f"cannot execute node kind {node.kind!r}")
        except Exception as exc:  # any node fault fails the graph with a cause
            node.status = FAILED
            node.error = str(exc)
            graph.status = GRAPH_FAILED
            graph.error = f"node {node.node_id} ({node.kind}) failed: {exc}"
            self._record(graph, "node_failed", {"node": node.node_id, "error": str(exc)})
            return
        if node.status == "running":
            node.status = DONE
        self._record(
            graph,
            "node_done",
            {"node": node.node_id, "kind": node.kind, "elapsed_s": time.time() - started},
        )

    def _run_llm(self, graph: ExecutionGraph, node: Node) -> None:
        purpose = node.payload.get("purpose")
        if purpose == "direct":
            reply = self.backend.complete(direct_prompt(graph.prompt), graph.request_id)
            node.result = reply
            graph.answer = reply
        elif purpose == "presentation":
            results = [
                graph.nodes[dep].result
                for dep in node.depends_on
                if graph.nodes[dep].kind == "service_call"
            ]
            reply = self.backend.complete(
                presentation_prompt(graph.prompt, results), graph.request_id
            )
            node.result = reply
            graph.answer = reply
        else:
            raise PlanningError(f"llm_call node with unknown purpose {purpose!r}")

    def _run_service(
        self, graph: ExecutionGraph, node: Node, allowed_services: set[str] | None
    ) -> None:
        service = node.payload.get("service")
        procedure = node.payload.get("procedure")
        arguments = node.payload.get("arguments")
        if not service or not procedure or arguments is None:
            raise PlanningError(f"service call {node.node_id} is unbound")
        if allowed_services is not None and service not in allowed_services:
            raise PermissionError(f"certificate does not allow service {service!r}")
        outcome = self.registry.invoke(service, procedure, arguments, graph.request_id)
        if not outcome.ok:
            raise RuntimeError(f"{service}.{procedure} failed ({outcome.error_kind}): {outcome.error}")
        node.result = outcome.result

    # -- pause / resume ---------------------------------------------------------

    def resume(
        self,
        graph: ExecutionGraph,
        user_reply: str,
        allowed_services: set[str] | None = None,
    ) -> ExecutionGraph:
        """Answer a parked graph's clarification and keep executing.

        Binding the reply is attempted without the model first; an LLM binder
        is only a fallback. A graph can be resumed once; stale graphs past
        the TTL fail instead of silently acting on old context.
        """
        with graph.lock:
            if graph.status != AWAITING:
                raise ResumeError(f"request {graph.request_id} is not awaiting input")
            if (
                graph.awaiting_since is not None
                and time.time() - graph.awaiting_since > self.config.awaiting_ttl_s
            ):
                graph.status = GRAPH_FAILED
                graph.error = "clarification expired"
                self._record(graph, "graph_failed", {"error": graph.error})
                raise ResumeError("clarification window expired; start a new request")
            operations = self._bind_reply(graph, user_reply)
            if operations is None:
                raise ResumeError(
                    "could not find usable operands in the reply; still waiting"
                )
            gate = next(
                (n for n in graph.nodes.values() if n.kind == "user_clarification"), None
            )
            if gate is None:
                raise ResumeError("graph has no clarification gate")
            gate.status = DONE
            gate.result = {"reply": user_reply}
            self._fill_service_calls(graph, operations)
            graph.status = RUNNING
            graph.clarification_question = None
            graph.awaiting_since = None
            self._record(graph, "resume", {"operations": [op.to_dict() for op in operations]})
        return self.run(graph, allowed_services)

    def _bind_reply(self, graph: ExecutionGraph, user_reply: str) -> list[BindingOp] | None:
        descriptor = self.registry.get(graph.service) if graph.service else None
        if descriptor is None:
            return None
        verb, numbers = extract_arithmetic(user_reply)
        if verb is None:
            verb, _ = extract_arithmetic(graph.prompt)
        if verb is None or descriptor.procedure(verb) is None:
            verb = descriptor.procedures[0].name
        proc = descriptor.procedure(verb)
        if numbers and proc is not None and bind_arguments(proc, numbers) is not None:
            return [BindingOp(verb, tuple(numbers))]
        if self._binder is not None:
            combined = f"{graph.prompt} {user_reply}"
            operations, _ = self._binder(descriptor, combined, graph.request_id)
            if operations:
                return operations
        return None

    def _fill_service_calls(self, graph: ExecutionGraph, operations: list[BindingOp]) -> None:
        descriptor = self.registry.get(graph.service)
        placeholders = [
            n
            for n in graph.nodes.values()
            if n.kind == "service_call" and n.payload.get("procedure") is None
        ]
        if not placeholders:
            raise ResumeError("graph has no unbound service calls")
        anchor = placeholders[0]
        presenters = [
            n
            for n in graph.nodes.values()
            if n.kind == "llm_call" and anchor.node_id in n.depends_on
        ]
        filled_ids = []
        for i, op in enumerate(operations):
            proc = descriptor.procedure(op.operation)
            arguments = bind_arguments(proc, list(op.numbers)) if proc else None
            if arguments is None:
                raise ResumeError(f"reply does not fit {graph.service}.{op.operation}")
            if i == 0:
                node = anchor
            else:
                node_id = f"n{len(graph.nodes) + 1}"
                node = Node(
                    node_id, "service_call", {}, depends_on=list(anchor.depends_on)
                )
                graph.nodes[node_id] = node
            node.payload = {
                "service": graph.service,
                "procedure": op.operation,
                "arguments": arguments,
            }
            filled_ids.append(node.node_id)
        for presenter in presenters:
            extras = [nid for nid in filled_ids if nid not in presenter.depends_on]
            presenter.depends_on.extend(extras)

    # -- tracing -------------------------------------------------------------

    def _record(self, graph: ExecutionGraph, event: str, attributes: dict) -> None:
        if self._traces is None:
            return
        now = time.time()
        self._traces.record(
            TraceEvent(
                request_id=graph.request_id,
                component="execution",
                event=event,
                started_at=now,
                ended_at=now,
                attributes=attributes,
            )
        )


class GraphStore:
    """Parked and finished graphs by request id, with awaiting-TTL purge."""

    def __init__(self, ttl_s: float = 30 * 60.0, capacity: int = 10_000):
        self._graphs: dict[str, ExecutionGraph] = {}
        self._ttl_s = ttl_s
        self._capacity = capacity
        self._lock = threading.RLock()

    def put(self, graph: ExecutionGraph) -> None:
        with self._lock:
            self._graphs[graph.request_id] = graph
            while len(self._graphs) > self._capacity:
                oldest = min(self._graphs.values(), key=lambda g: g.created_at)
                del self._graphs[oldest.request_id]

    def get(self, request_id: str) -> ExecutionGraph | None:
        self.purge_expired()
        with self._lock:
            return self._graphs.get(request_id)

    def purge_expired(self) -> int:
        """Fail awaiting graphs whose clarification window has lapsed."""
        now = time.time()
        expired = 0
        with self._lock:
            for graph in self._graphs.values():
                if (
                    graph.status == AWAITING
                    and graph.awaiting_since is not None
                    and now - graph.awaiting_since > self._ttl_s
                ):
                    graph.status = GRAPH_FAILED
                    graph.error = "clarification expired"
                    expired += 1
        return expired

    def awaiting(self) -> list[ExecutionGraph]:
        with self._lock:
            return [g for g in self._graphs.values() if g.status == AWAITING]
