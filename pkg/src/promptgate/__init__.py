"""promptgate: a middleware gateway between chat prompts and registered services.

Authenticated prompts are routed to self-described services by utterance
similarity, arguments are extracted with a binding prompt, execution runs as
a small graph with human-in-the-loop pauses, and every hop is traced.
"""

from .backends import (
    BackendConfig,
    ChatMessage,
    HttpBackend,
    MockBackend,
    binding_prompt,
    direct_prompt,
    discovery_prompt,
    make_backend,
    presentation_prompt,
)
from .caching import PromptCache, SessionStore
from .config import GatewayConfig, load_config
from .errors import (
    AuthenticationError,
    BackendError,
    ConfigError,
    MiddlewareError,
    ResumeError,
)
from .execution import ExecutionGraph, Executor, GraphStore
from .gateway import Gateway
from .routing import BindingOp, Router, RouterConfig, RoutingDecision, VectorIndex
from .scheduling import FifoScheduler, ScheduledRequest, estimate_session_bytes
from .services import (
    LocalServiceTransport,
    ProcedureSpec,
    ServiceDescriptor,
    ServiceRegistry,
    SlotSpec,
)
from .tracing import DriftDetector, TraceEvent, TraceStore
from .users import AccessCertificate, UserRecord, UserRegistry

__version__ = "0.1.0"

__all__ = [
    "AccessCertificate",
    "AuthenticationError",
    "BackendConfig",
    "BackendError",
    "BindingOp",
    "ChatMessage",
    "ConfigError",
    "DriftDetector",
    "ExecutionGraph",
    "Executor",
    "FifoScheduler",
    "Gateway",
    "GatewayConfig",
    "GraphStore",
    "HttpBackend",
    "LocalServiceTransport",
    "MiddlewareError",
    "MockBackend",
    "ProcedureSpec",
    "PromptCache",
    "ResumeError",
    "Router",
    "RouterConfig",
    "RoutingDecision",
    "ScheduledRequest",
    "ServiceDescriptor",
    "ServiceRegistry",
    "SessionStore",
    "SlotSpec",
    "TraceEvent",
    "TraceStore",
    "UserRecord",
    "UserRegistry",
    "VectorIndex",
    "binding_prompt",
    "direct_prompt",
    "discovery_prompt",
    "estimate_session_bytes",
    "load_config",
    "make_backend",
    "presentation_prompt",
]
