"""Calculator service: the reference tool the gateway routes arithmetic to.

Implements the invoke wire contract ({"procedure", "arguments"} in,
{"ok", "result"|"error"} out) three ways: as a plain handler function, as
a LocalServiceTransport binding for in-process use, and as a small FastAPI
app for running it as a real HTTP service.
"""

from __future__ import annotations

from typing import Any

from .services import (
    LocalServiceTransport,
    ProcedureSpec,
    ServiceDescriptor,
    ServiceRegistry,
    SlotSpec,
)

LOCAL_ENDPOINT = "local://calculator"

_NUMBERS = (SlotSpec("numbers", "number", repeated=True),)

DESCRIPTOR = ServiceDescriptor(
    name="calculator",
    description="Does arithmetic: adds, subtracts, and multiplies lists of numbers.",
    utterances=(
        "add {numbers} and {numbers}",
        "what is {numbers} plus {numbers}",
        "sum {numbers} and {numbers}",
        "would you add {numbers} and {numbers}",
        "subtract {numbers} minus {numbers}",
        "what is {numbers} minus {numbers}",
        "multiply {numbers} by {numbers}",
        "what is {numbers} times {numbers}",
        "what is the product of {numbers} and {numbers}",
    ),
    procedures=(
        ProcedureSpec("add", _NUMBERS, "Sum of all numbers."),
        ProcedureSpec("subtract", _NUMBERS, "First number minus the rest, left to right."),
        ProcedureSpec("multiply", _NUMBERS, "Product of all numbers."),
    ),
    endpoint=LOCAL_ENDPOINT,
    worker_class="13B",
)


def compute(procedure: str, numbers: list[int | float]) -> int | float:
    """Left-fold the operation over the numbers ("Add 5 to 3 to 2." is 10)."""
    if procedure == "add":
        return sum(numbers)
    if procedure == "subtract":
        acc = numbers[0]
        for n in numbers[1:]:
            acc -= n
        return acc
    if procedure == "multiply":
        acc = numbers[0]
        for n in numbers[1:]:
            acc *= n
        return acc
    raise ValueError(f"unknown procedure {procedure!r}")


def handle_invoke(payload: dict) -> dict:
    """Wire-contract handler. Never raises; failures come back as ok=False."""
    procedure = payload.get("procedure")
    arguments = payload.get("arguments")
    if procedure not in ("add", "subtract", "multiply"):
        return {"ok": False, "error": f"unknown procedure: {procedure!r}"}
    if not isinstance(arguments, dict) or "numbers" not in arguments:
        return {"ok": False, "error": "arguments must contain 'numbers'"}
    numbers = arguments["numbers"]
    # A single operand is a valid identity fold (add [7] is 7); only empty is an error.
    if (
        not isinstance(numbers, list)
        or not numbers
        or not all(isinstance(n, (int, float)) and not isinstance(n, bool) for n in numbers)
    ):
        return {"ok": False, "error": "'numbers' must be a non-empty list of numbers"}
    return {"ok": True, "result": compute(procedure, numbers)}


def bind_local(transport: LocalServiceTransport, endpoint: str = LOCAL_ENDPOINT) -> None:
    transport.bind(endpoint, handle_invoke)


def register_calculator(
    registry: ServiceRegistry,
    transport: LocalServiceTransport | None = None,
    endpoint: str = LOCAL_ENDPOINT,
) -> ServiceDescriptor:
    """Register the calculator, optionally binding its in-process handler."""
    descriptor = ServiceDescriptor.from_dict({**DESCRIPTOR.to_dict(), "endpoint": endpoint})
    if transport is not None:
        bind_local(transport, endpoint)
    registry.register(descriptor)
    return descriptor


def create_app():
    """FastAPI app exposing POST /invoke, for running the calculator standalone."""
    from fastapi import Body, FastAPI

    app = FastAPI(title="calculator-service")

    @app.post("/invoke")
    async def invoke(payload: dict = Body()) -> dict:
        return handle_invoke(payload)

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok"}

    return app
