"""HTTP surface of the gateway.

Thin FastAPI adapter: every route authenticates (where it applies), calls
one Gateway method, and maps the exception taxonomy onto status codes.
Admin and trace reads are deployment-internal and unauthenticated.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .errors import (
    AuthenticationError,
    DescriptorValidationError,
    DuplicateServiceError,
    DuplicateUserError,
    ResumeError,
)
from .gateway import Gateway
from .services import ServiceDescriptor

log = logging.getLogger(__name__)


class ChatRequest(BaseModel):
    auth_key: str
    session_id: str = "default"
    prompt: str


class ResumeRequest(BaseModel):
    auth_key: str
    reply: str


class UserRequest(BaseModel):
    user_id: str
    allowed_services: list[str] = Field(default_factory=list)
    allowed_worker_classes: list[str] = Field(default_factory=list)


def _auth_of(query_key: str | None, header_key: str | None) -> str:
    key = query_key or header_key
    if not key:
        raise HTTPException(status_code=401, detail="missing auth key")
    return key


def create_app(gateway: Gateway | None = None) -> FastAPI:
    gateway = gateway or Gateway()
    app = FastAPI(title="promptgate", version="0.1.0")
    app.state.gateway = gateway
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/v1/chat")
    def chat(body: ChatRequest) -> dict:
        try:
            return gateway.handle_chat(body.auth_key, body.session_id, body.prompt)
        except AuthenticationError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from exc

    @app.post("/v1/requests/{request_id}/resume")
    def resume(request_id: str, body: ResumeRequest) -> dict:
        try:
            return gateway.resume(body.auth_key, request_id, body.reply)
        except AuthenticationError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from exc
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ResumeError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/v1/requests/{request_id}")
    def get_request(
        request_id: str,
        auth_key: str | None = Query(default=None),
        x_auth_key: str | None = Header(default=None),
    ) -> dict:
        key = _auth_of(auth_key, x_auth_key)
        try:
            return gateway.describe_request(key, request_id)
        except AuthenticationError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from exc
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/v1/services", status_code=201)
    def register_service(descriptor: dict) -> dict:
        try:
            parsed = ServiceDescriptor.from_dict(descriptor)
            gateway.register_service(parsed)
        except (KeyError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"bad descriptor: {exc}") from exc
        except DescriptorValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except DuplicateServiceError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"registered": parsed.name}

    @app.get("/v1/services")
    def list_services() -> dict:
        return {"services": [d.to_dict() for d in gateway.services.list_services()]}

    @app.post("/v1/users", status_code=201)
    def add_user(body: UserRequest) -> dict:
        try:
            auth_key = gateway.add_user(
                body.user_id, body.allowed_services, body.allowed_worker_classes
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except DuplicateUserError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"user_id": body.user_id, "auth_key": auth_key}

    @app.get("/v1/traces/{request_id}")
    def traces(request_id: str) -> dict:
        return {"request_id": request_id, "events": gateway.trace_events(request_id)}

    @app.get("/v1/admin/scheduler")
    def admin_scheduler() -> dict:
        return gateway.admin_scheduler()

    @app.get("/v1/admin/cache")
    def admin_cache() -> dict:
        return gateway.admin_cache()

    @app.get("/v1/admin/drift")
    def admin_drift() -> dict:
        return gateway.admin_drift()

    @app.get("/v1/debug/index")
    def debug_index() -> dict:
        return gateway.debug_index()

    @app.get("/healthz")
    def healthz() -> dict:
        return gateway.health()

    return app
