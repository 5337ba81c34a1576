"""User registry: onboarding, auth keys, and per-service access certificates.

Every request entering the middleware is gatekept here. Auth keys are opaque
random strings (256 bits of entropy); certificates are server-side records
listing the services and worker classes a user may touch. State is kept in
memory and mirrored to a JSON file on every change so a restarted gateway
sees the same principals.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AuthenticationError, DuplicateUserError, UnknownUserError
from .tracing import TraceEvent, TraceStore


@dataclass(frozen=True)
class AccessCertificate:
    """Allowed service names and worker-class tags for one user.

    Membership checks are case-sensitive; an empty service set is legal and
    denies access to everything.
    """

    allowed_services: frozenset[str] = frozenset()
    allowed_worker_classes: frozenset[str] = frozenset()

    @classmethod
    def of(cls, services=(), worker_classes=()) -> "AccessCertificate":
        return cls(frozenset(services), frozenset(worker_classes))

    def permits_service(self, service_name: str) -> bool:
        return service_name in self.allowed_services

    def permits_worker_class(self, worker_class: str) -> bool:
        return worker_class in self.allowed_worker_classes

    def to_dict(self) -> dict:
        return {
            "allowed_services": sorted(self.allowed_services),
            "allowed_worker_classes": sorted(self.allowed_worker_classes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AccessCertificate":
        return cls(
            frozenset(data.get("allowed_services", ())),
            frozenset(data.get("allowed_worker_classes", ())),
        )


@dataclass
class UserRecord:
    user_id: str
    auth_key: str
    certificate: AccessCertificate
    created_at: float = field(default_factory=time.time)
    revoked: bool = False

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "auth_key": self.auth_key,
            "certificate": self.certificate.to_dict(),
            "created_at": self.created_at,
            "revoked": self.revoked,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserRecord":
        return cls(
            user_id=data["user_id"],
            auth_key=data["auth_key"],
            certificate=AccessCertificate.from_dict(data["certificate"]),
            created_at=data["created_at"],
            revoked=data["revoked"],
        )


class UserRegistry:
    """In-memory authoritative user store with file mirroring.

    Reads are concurrent; register/revoke are serialized behind one lock so
    a single instance can be shared across request handlers.
    """

    def __init__(self, path: str | Path | None = None, traces: TraceStore | None = None):
        self._users: dict[str, UserRecord] = {}
        self._by_key: dict[str, str] = {}
        self._path = Path(path) if path else None
        self._traces = traces
        self._lock = threading.RLock()
        if self._path and self._path.exists():
            self._load()

    # -- operations ----------------------------------------------------------

    def register_user(self, user_id: str, certificate: AccessCertificate) -> UserRecord:
        # slug ids keep every derived key ("user:session", request ids,
        # cache scopes) unambiguous
        if not user_id or not re.fullmatch(r"[A-Za-z0-9_\-]+", user_id):
            raise ValueError(f"user id must be a non-empty slug, got {user_id!r}")
        with self._lock:
            existing = self._users.get(user_id)
            if existing is not None and not existing.revoked:
                raise DuplicateUserError(f"user already registered: {user_id}")
            auth_key = secrets.token_urlsafe(32)
            record = UserRecord(user_id=user_id, auth_key=auth_key, certificate=certificate)
            if existing is not None:
                # re-registration after revoke replaces the old record
                self._by_key.pop(existing.auth_key, None)
            self._users[user_id] = record
            self._by_key[auth_key] = user_id
            self._persist()
            return record

    def authenticate(self, auth_key: str) -> UserRecord:
        """Resolve an auth key to an active user; revoked keys are treated
        exactly like unknown ones."""
        with self._lock:
            user_id = self._by_key.get(auth_key)
            record = self._users.get(user_id) if user_id else None
        if record is None or record.revoked:
            raise AuthenticationError("unknown or revoked auth key")
        return record

    def check_access(self, auth_key: str, service_name: str, request_id: str = "-") -> bool:
        """True = allow, False = deny. Unknown/revoked keys raise instead."""
        try:
            record = self.authenticate(auth_key)
            allowed = record.certificate.permits_service(service_name)
            outcome = "allow" if allowed else "deny"
            user = record.user_id
        except AuthenticationError:
            self._audit(request_id, service_name, user="?", outcome="auth-error")
            raise
        self._audit(request_id, service_name, user=user, outcome=outcome)
        return allowed

    def revoke(self, user_id: str) -> None:
        """Idempotent: revoking an already-revoked user is a no-op."""
        with self._lock:
            record = self._users.get(user_id)
            if record is None:
                raise UnknownUserError(f"unknown user: {user_id}")
            if not record.revoked:
                record.revoked = True
                self._persist()

    def get(self, user_id: str) -> UserRecord:
        with self._lock:
            record = self._users.get(user_id)
        if record is None:
            raise UnknownUserError(f"unknown user: {user_id}")
        return record

    def list_users(self) -> list[UserRecord]:
        with self._lock:
            return sorted(self._users.values(), key=lambda r: r.created_at)

    # -- internals -----------------------------------------------------------

    def _audit(self, request_id: str, service: str, user: str, outcome: str) -> None:
        if self._traces is None:
            return
        now = time.time()
        self._traces.record(
            TraceEvent(
                request_id=request_id,
                component="user-registry",
                event="check_access",
                started_at=now,
                ended_at=now,
                attributes={"user": user, "service": service, "outcome": outcome},
            )
        )

    def _persist(self) -> None:
        if self._path is None:
            return
        self._path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"users": [r.to_dict() for r in self.list_users()]}
        self._path.write_text(json.dumps(payload, indent=2), encoding="utf-8")

    def _load(self) -> None:
        payload = json.loads(self._path.read_text(encoding="utf-8"))
        for item in payload.get("users", ()):
            record = UserRecord.from_dict(item)
            self._users[record.user_id] = record
            if not record.revoked:
                self._by_key[record.auth_key] = record.user_id
