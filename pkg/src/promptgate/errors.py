"""Exception taxonomy shared across the middleware components."""

from __future__ import annotations


class MiddlewareError(Exception):
    """Base class for all promptgate errors."""


class ConfigError(MiddlewareError):
    """Configuration file could not be read or parsed."""


# --- user registry ---------------------------------------------------------


class AuthenticationError(MiddlewareError):
    """Auth key does not map to an active user (unknown or revoked)."""


class DuplicateUserError(MiddlewareError):
    pass


class UnknownUserError(MiddlewareError):
    pass


# --- service registry ------------------------------------------------------


class DuplicateServiceError(MiddlewareError):
    pass


class UnknownServiceError(MiddlewareError):
    pass


class UnknownProcedureError(MiddlewareError):
    pass


class DescriptorValidationError(MiddlewareError):
    """A service descriptor violates its structural invariants."""


class ArgumentTypeError(MiddlewareError):
    """Invocation arguments do not satisfy the procedure's slot types."""


# --- scheduler --------------------------------------------------------------


class DuplicateRequestError(MiddlewareError):
    pass


class UnknownWorkerError(MiddlewareError):
    pass


class UnknownModelClassError(MiddlewareError):
    pass


class ModelTooLargeError(MiddlewareError):
    """Model exceeds the total memory capacity of the target worker."""


# --- llm backend -------------------------------------------------------------


class BackendError(MiddlewareError):
    """Transport, timeout, or malformed response from an LLM provider."""


# --- execution graph ---------------------------------------------------------


class PlanningError(MiddlewareError):
    """Routing decision cannot be turned into a runnable graph."""


class ResumeError(MiddlewareError):
    """Resume was requested on a request that is not awaiting user input."""
