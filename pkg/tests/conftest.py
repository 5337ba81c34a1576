"""Shared fixtures: a gateway wired to an in-process calculator."""

from __future__ import annotations

import pytest

from promptgate import Gateway, GatewayConfig, LocalServiceTransport
from promptgate.calculator import register_calculator


class CountingTransport(LocalServiceTransport):
    """Local transport that records every dispatched payload."""

    def __init__(self):
        super().__init__()
        self.calls: list[tuple[str, dict]] = []

    def send(self, endpoint: str, payload: dict) -> dict:
        self.calls.append((endpoint, payload))
        return super().send(endpoint, payload)


@pytest.fixture
def transport() -> CountingTransport:
    return CountingTransport()


@pytest.fixture
def gateway(transport) -> Gateway:
    gw = Gateway(GatewayConfig(), transport=transport)
    register_calculator(gw.services, transport)
    return gw


@pytest.fixture
def auth_key(gateway) -> str:
    return gateway.add_user("alice", ["calculator"], ["13B", "70B"])
