import random

import pytest
from fastapi.testclient import TestClient

from promptgate.calculator import (
    DESCRIPTOR,
    compute,
    create_app,
    handle_invoke,
    register_calculator,
)
from promptgate.services import LocalServiceTransport, ServiceRegistry


class TestCompute:
    def test_known_sums(self):
        assert compute("add", [10, 45]) == 55
        assert compute("add", [5, 3, 2]) == 10

    def test_left_fold_against_independent_oracle(self):
        rng = random.Random(4242)
        for _ in range(300):
            op = rng.choice(["add", "subtract", "multiply"])
            # length 1 is legal: every fold is the identity on a singleton
            numbers = [rng.randint(-50, 999) for _ in range(rng.randint(1, 12))]
            if op == "add":
                want = sum(numbers)
            elif op == "subtract":
                want = numbers[0] - sum(numbers[1:])
            else:
                want = 1
                for n in numbers:
                    want *= n
            assert compute(op, numbers) == want

    @pytest.mark.parametrize("op", ["add", "subtract", "multiply"])
    def test_singleton_is_identity(self, op):
        assert compute(op, [7]) == 7

    def test_big_integers_never_wrap(self):
        numbers = [2**31 - 1] * 8
        want = (2**31 - 1) ** 8
        assert compute("multiply", numbers) == want
        assert handle_invoke(
            {"procedure": "multiply", "arguments": {"numbers": numbers}}
        ) == {"ok": True, "result": want}

    def test_unknown_procedure(self):
        with pytest.raises(ValueError):
            compute("divide", [1, 2])

    def test_floats_supported(self):
        assert compute("add", [0.5, 0.25]) == 0.75


class TestHandleInvoke:
    def test_wire_contract_success(self):
        reply = handle_invoke({"procedure": "add", "arguments": {"numbers": [10, 45]}})
        assert reply == {"ok": True, "result": 55}

    def test_single_operand_identity_fold(self):
        reply = handle_invoke({"procedure": "add", "arguments": {"numbers": [7]}})
        assert reply == {"ok": True, "result": 7}

    @pytest.mark.parametrize(
        "payload,needle",
        [
            ({"procedure": "divide", "arguments": {"numbers": [1, 2]}}, "unknown procedure"),
            ({"procedure": "add"}, "arguments"),
            ({"procedure": "add", "arguments": {"numbers": []}}, "non-empty"),
            ({"procedure": "add", "arguments": {"numbers": ["x", "y"]}}, "non-empty"),
            ({"procedure": "add", "arguments": {"numbers": [True, False]}}, "non-empty"),
            ({"procedure": "add", "arguments": {"numbers": 5}}, "non-empty"),
        ],
    )
    def test_errors_come_back_structured(self, payload, needle):
        reply = handle_invoke(payload)
        assert reply["ok"] is False
        assert needle in reply["error"]

    def test_never_raises_on_garbage(self):
        assert handle_invoke({})["ok"] is False


class TestRegistration:
    def test_register_binds_local_handler(self):
        transport = LocalServiceTransport()
        registry = ServiceRegistry(transport=transport)
        register_calculator(registry, transport)
        outcome = registry.invoke("calculator", "multiply", {"numbers": [6, 7]})
        assert outcome.ok and outcome.result == 42

    def test_descriptor_shape(self):
        assert DESCRIPTOR.name == "calculator"
        assert set(DESCRIPTOR.operation_names()) == {"add", "subtract", "multiply"}
        for proc in DESCRIPTOR.procedures:
            (slot,) = proc.parameters
            assert slot.repeated and slot.type == "number"
        assert DESCRIPTOR.worker_class == "13B"


class TestHttpApp:
    def test_invoke_route(self):
        client = TestClient(create_app())
        reply = client.post(
            "/invoke", json={"procedure": "subtract", "arguments": {"numbers": [10, 4]}}
        )
        assert reply.status_code == 200
        assert reply.json() == {"ok": True, "result": 6}

    def test_healthz(self):
        client = TestClient(create_app())
        assert client.get("/healthz").json() == {"status": "ok"}
