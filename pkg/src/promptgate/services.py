"""Service registry: descriptors, validation, and RPC-style dispatch.

Services self-describe with a name, a natural-language description, example
utterances whose {slot} placeholders line up with typed parameters, and the
procedures they expose. The registry validates descriptors on registration,
persists them as JSON, and invokes procedures over a pluggable transport
(HTTP in production, in-process for tests and demos).
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import httpx

from .errors import (
    ArgumentTypeError,
    DescriptorValidationError,
    DuplicateServiceError,
    UnknownProcedureError,
    UnknownServiceError,
)
from .tracing import TraceEvent, TraceStore

log = logging.getLogger(__name__)

SLOT_PATTERN = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
SLOT_TYPES = ("number", "integer", "string", "boolean")

_PY_TYPES: dict[str, tuple[type, ...]] = {
    "number": (int, float),
    "integer": (int,),
    "string": (str,),
    "boolean": (bool,),
}


@dataclass(frozen=True)
class SlotSpec:
    """A typed parameter slot. `repeated` means a JSON list of the base type."""

    name: str
    type: str
    repeated: bool = False

    def __post_init__(self) -> None:
        if self.type not in SLOT_TYPES:
            raise DescriptorValidationError(
                f"slot {self.name!r}: unknown type {self.type!r} (expected one of {SLOT_TYPES})"
            )

    def accepts(self, value: Any) -> bool:
        expected = _PY_TYPES[self.type]
        if self.repeated:
            return isinstance(value, list) and all(self._scalar_ok(v, expected) for v in value)
        return self._scalar_ok(value, expected)

    @staticmethod
    def _scalar_ok(value: Any, expected: tuple[type, ...]) -> bool:
        # bool is an int subclass; only a boolean slot may take booleans.
        if isinstance(value, bool):
            return bool in expected
        return isinstance(value, expected)

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.type, "repeated": self.repeated}

    @classmethod
    def from_dict(cls, raw: dict) -> "SlotSpec":
        return cls(raw["name"], raw["type"], bool(raw.get("repeated", False)))


@dataclass(frozen=True)
class ProcedureSpec:
    name: str
    parameters: tuple[SlotSpec, ...]
    description: str = ""

    def slot(self, name: str) -> SlotSpec | None:
        for spec in self.parameters:
            if spec.name == name:
                return spec
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": [p.to_dict() for p in self.parameters],
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ProcedureSpec":
        return cls(
            raw["name"],
            tuple(SlotSpec.from_dict(p) for p in raw.get("parameters", [])),
            raw.get("description", ""),
        )


@dataclass(frozen=True)
class ServiceDescriptor:
    name: str
    description: str
    utterances: tuple[str, ...]
    procedures: tuple[ProcedureSpec, ...]
    endpoint: str | None = None
    worker_class: str = "default"

    def procedure(self, name: str) -> ProcedureSpec | None:
        for proc in self.procedures:
            if proc.name == name:
                return proc
        return None

    def operation_names(self) -> list[str]:
        return [p.name for p in self.procedures]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "utterances": list(self.utterances),
            "procedures": [p.to_dict() for p in self.procedures],
            "endpoint": self.endpoint,
            "worker_class": self.worker_class,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ServiceDescriptor":
        return cls(
            name=raw["name"],
            description=raw["description"],
            utterances=tuple(raw.get("utterances", ())),
            procedures=tuple(ProcedureSpec.from_dict(p) for p in raw.get("procedures", ())),
            endpoint=raw.get("endpoint"),
            worker_class=raw.get("worker_class", "default"),
        )


def validate_descriptor(descriptor: ServiceDescriptor) -> None:
    """Reject descriptors that could not be routed or invoked safely."""
    if not descriptor.name or not re.fullmatch(r"[A-Za-z0-9_\-]+", descriptor.name):
        raise DescriptorValidationError(
            f"service name must be a non-empty slug, got {descriptor.name!r}"
        )
    if not descriptor.description.strip():
        raise DescriptorValidationError(f"{descriptor.name}: description must be non-empty")
    if not descriptor.utterances:
        raise DescriptorValidationError(f"{descriptor.name}: at least one utterance required")
    if not descriptor.procedures:
        raise DescriptorValidationError(f"{descriptor.name}: at least one procedure required")
    seen = set()
    for proc in descriptor.procedures:
        if proc.name in seen:
            raise DescriptorValidationError(
                f"{descriptor.name}: duplicate procedure {proc.name!r}"
            )
        seen.add(proc.name)
        slot_names = [p.name for p in proc.parameters]
        if len(slot_names) != len(set(slot_names)):
            raise DescriptorValidationError(
                f"{descriptor.name}.{proc.name}: duplicate parameter names"
            )
    known_slots = {p.name for proc in descriptor.procedures for p in proc.parameters}
    for utterance in descriptor.utterances:
        if not utterance.strip():
            raise DescriptorValidationError(f"{descriptor.name}: blank utterance")
        for slot in SLOT_PATTERN.findall(utterance):
            if slot not in known_slots:
                raise DescriptorValidationError(
                    f"{descriptor.name}: utterance slot {{{slot}}} matches no procedure parameter"
                )


@dataclass
class InvocationResult:
    ok: bool
    result: Any = None
    error: str | None = None
    error_kind: str | None = None  # transport | service

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "result": self.result,
            "error": self.error,
            "error_kind": self.error_kind,
        }


class ServiceTransport(Protocol):
    def send(self, endpoint: str, payload: dict) -> dict: ...


class HttpServiceTransport:
    """POST {endpoint}/invoke with {"procedure", "arguments"}."""

    def __init__(self, timeout_s: float = 10.0):
        self._client = httpx.Client(timeout=timeout_s)

    def send(self, endpoint: str, payload: dict) -> dict:
        url = endpoint.rstrip("/") + "/invoke"
        response = self._client.post(url, json=payload)
        response.raise_for_status()
        return response.json()

    def close(self) -> None:
        self._client.close()


class LocalServiceTransport:
    """In-process handlers keyed by endpoint, still JSON round-tripped so
    handlers see exactly what they would over the wire."""

    def __init__(self):
        self._handlers: dict[str, Callable[[dict], dict]] = {}

    def bind(self, endpoint: str, handler: Callable[[dict], dict]) -> None:
        self._handlers[endpoint] = handler

    def send(self, endpoint: str, payload: dict) -> dict:
        handler = self._handlers.get(endpoint)
        if handler is None:
            raise ConnectionError(f"no local handler bound to {endpoint!r}")
        wire = json.loads(json.dumps(payload))
        return json.loads(json.dumps(handler(wire)))


class ServiceRegistry:
    """Validated service catalog with JSON persistence and invoke dispatch."""

    def __init__(
        self,
        path: str | None = None,
        transport: ServiceTransport | None = None,
        traces: TraceStore | None = None,
        invoke_timeout_s: float = 10.0,
    ):
        self._path = path
        self._transport = transport or HttpServiceTransport(timeout_s=invoke_timeout_s)
        self._traces = traces
        self._services: dict[str, ServiceDescriptor] = {}
        self._order: list[str] = []
        self._version = 0
        self._listeners: list[Callable[[], None]] = []
        self._lock = threading.RLock()
        if path:
            self._load()

    # -- catalog ------------------------------------------------------------

    def register(self, descriptor: ServiceDescriptor) -> None:
        validate_descriptor(descriptor)
        with self._lock:
            if descriptor.name in self._services:
                raise DuplicateServiceError(f"service {descriptor.name!r} already registered")
            self._services[descriptor.name] = descriptor
            self._order.append(descriptor.name)
            self._version += 1
            self._persist()
        log.info("registered service %s", descriptor.name)
        self._notify()

    def deregister(self, name: str) -> None:
        with self._lock:
            if name not in self._services:
                raise UnknownServiceError(f"service {name!r} is not registered")
            del self._services[name]
            self._order.remove(name)
            self._version += 1
            self._persist()
        log.info("deregistered service %s", name)
        self._notify()

    def get(self, name: str) -> ServiceDescriptor:
        with self._lock:
            descriptor = self._services.get(name)
        if descriptor is None:
            raise UnknownServiceError(f"service {name!r} is not registered")
        return descriptor

    def list_services(self) -> list[ServiceDescriptor]:
        with self._lock:
            return [self._services[name] for name in self._order]

    def meta(self) -> dict[str, str]:
        """name -> description mapping, in registration order."""
        with self._lock:
            return {name: self._services[name].description for name in self._order}

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def subscribe(self, listener: Callable[[], None]) -> None:
        self._listeners.append(listener)

    def _notify(self) -> None:
        for listener in self._listeners:
            listener()

    # -- dispatch -------------------------------------------------------------

    def invoke(
        self,
        service_name: str,
        procedure: str,
        arguments: dict[str, Any],
        request_id: str = "-",
    ) -> InvocationResult:
        """Dispatch one procedure call.

        Contract violations the caller could have avoided (unknown service or
        procedure, arguments that fail the slot types) raise. Failures past
        the validation boundary come back as a structured InvocationResult so
        the execution layer can decide on retries or surfacing.
        """
        descriptor = self.get(service_name)
        proc = descriptor.procedure(procedure)
        if proc is None:
            raise UnknownProcedureError(
                f"{service_name} has no procedure {procedure!r} "
                f"(has: {descriptor.operation_names()})"
            )
        self._check_arguments(service_name, proc, arguments)
        if descriptor.endpoint is None:
            raise UnknownServiceError(f"service {service_name!r} has no endpoint bound")
        started = time.time()
        payload = {"procedure": procedure, "arguments": arguments}
        try:
            raw = self._transport.send(descriptor.endpoint, payload)
        except Exception as exc:
            outcome = InvocationResult(
                ok=False, error=f"transport failure: {exc}", error_kind="transport"
            )
        else:
            if not isinstance(raw, dict) or "ok" not in raw:
                outcome = InvocationResult(
                    ok=False,
                    error=f"malformed service reply: {raw!r}",
                    error_kind="transport",
                )
            elif raw["ok"]:
                outcome = InvocationResult(ok=True, result=raw.get("result"))
            else:
                outcome = InvocationResult(
                    ok=False,
                    error=str(raw.get("error", "service error")),
                    error_kind="service",
                )
        if self._traces is not None:
            self._traces.record(
                TraceEvent(
                    request_id=request_id,
                    component="service-registry",
                    event="invoke",
                    started_at=started,
                    ended_at=time.time(),
                    attributes={
                        "service": service_name,
                        "procedure": procedure,
                        "ok": outcome.ok,
                        "error_kind": outcome.error_kind,
                    },
                )
            )
        return outcome

    @staticmethod
    def _check_arguments(service_name: str, proc: ProcedureSpec, arguments: dict[str, Any]) -> None:
        expected = {p.name for p in proc.parameters}
        given = set(arguments)
        if given != expected:
            raise ArgumentTypeError(
                f"{service_name}.{proc.name}: arguments {sorted(given)} "
                f"do not match parameters {sorted(expected)}"
            )
        for spec in proc.parameters:
            value = arguments[spec.name]
            if not spec.accepts(value):
                shape = f"list of {spec.type}" if spec.repeated else spec.type
                raise ArgumentTypeError(
                    f"{service_name}.{proc.name}: parameter {spec.name!r} "
                    f"expects {shape}, got {value!r}"
                )

    # -- persistence -----------------------------------------------------------

    def _persist(self) -> None:
        if not self._path:
            return
        state = {"services": [self._services[name].to_dict() for name in self._order]}
        with open(self._path, "w", encoding="utf-8") as fh:
            json.dump(state, fh, indent=2)

    def _load(self) -> None:
        try:
            with open(self._path, "r", encoding="utf-8") as fh:
                state = json.load(fh)
        except FileNotFoundError:
            return
        for raw in state.get("services", []):
            descriptor = ServiceDescriptor.from_dict(raw)
            validate_descriptor(descriptor)
            self._services[descriptor.name] = descriptor
            self._order.append(descriptor.name)
