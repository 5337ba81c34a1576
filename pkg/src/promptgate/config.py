"""Gateway configuration: JSON file, defaults, and environment overrides.

PROMPTGATE_PORT and PROMPTGATE_BACKEND_URL override the file so deployments
can retarget the listener and the model endpoint without editing config.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .backends import BackendConfig
from .errors import ConfigError
from .execution import ExecutorConfig
from .routing import RouterConfig

ENV_PORT = "PROMPTGATE_PORT"
ENV_BACKEND_URL = "PROMPTGATE_BACKEND_URL"


@dataclass(frozen=True)
class CacheConfig:
    capacity: int = 10_000
    similarity_threshold: float = 0.95
    enabled: bool = True


@dataclass(frozen=True)
class SessionConfig:
    budget_bytes: int = 64 * 1024 * 1024


@dataclass(frozen=True)
class DriftConfig:
    window: int = 200
    threshold: float = 0.30
    min_reference: int = 50


@dataclass(frozen=True)
class WorkerConfig:
    worker_id: str
    worker_class: str
    memory_budget_bytes: int


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    backend: BackendConfig = field(default_factory=BackendConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    sessions: SessionConfig = field(default_factory=SessionConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    workers: tuple[WorkerConfig, ...] = (
        WorkerConfig("w0", "13B", 40_000_000_000),
    )
    invoke_timeout_s: float = 10.0
    users_path: str | None = None
    services_path: str | None = None


def _build(cls, raw: dict, where: str):
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} (known: {sorted(known)})")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path: str | None = None, env: dict | None = None) -> GatewayConfig:
    """Read config JSON (or defaults when path is None), then apply env."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
            ) from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")

    sections = {
        "backend": BackendConfig,
        "router": RouterConfig,
        "cache": CacheConfig,
        "sessions": SessionConfig,
        "drift": DriftConfig,
        "executor": ExecutorConfig,
    }
    kwargs: dict = {}
    for key, value in raw.items():
        if key in sections:
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a JSON object")
            kwargs[key] = _build(sections[key], value, key)
        elif key == "workers":
            if not isinstance(value, list):
                raise ConfigError("'workers' must be a JSON array")
            kwargs[key] = tuple(
                _build(WorkerConfig, w, f"workers[{i}]") for i, w in enumerate(value)
            )
        elif key in GatewayConfig.__dataclass_fields__:
            kwargs[key] = value
        else:
            raise ConfigError(
                f"unknown top-level key {key!r} "
                f"(known: {sorted(GatewayConfig.__dataclass_fields__)})"
            )
    config = _build(GatewayConfig, kwargs, "config")

    if env.get(ENV_PORT):
        try:
            port = int(env[ENV_PORT])
        except ValueError as exc:
            raise ConfigError(f"{ENV_PORT} must be an integer, got {env[ENV_PORT]!r}") from exc
        config = GatewayConfig(**{**_as_kwargs(config), "port": port})
    if env.get(ENV_BACKEND_URL):
        backend = BackendConfig(
            **{**_as_kwargs(config.backend), "base_url": env[ENV_BACKEND_URL]}
        )
        config = GatewayConfig(**{**_as_kwargs(config), "backend": backend})
    return config


def _as_kwargs(instance) -> dict:
    return {name: getattr(instance, name) for name in instance.__dataclass_fields__}
