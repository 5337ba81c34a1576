"""
Pausing for clarification and resuming with the user's reply
============================================================

When the model cannot produce a usable service call, the execution graph
does not guess: it parks the request, asks the user a question, and picks
up exactly where it stopped once a reply arrives. Here the mock backend is
forced to emit garbage on every binding attempt so the pause always happens.
"""

from promptgate import Gateway, GatewayConfig
from promptgate.backends import BackendConfig
from promptgate.calculator import register_calculator
from promptgate.services import LocalServiceTransport

transport = LocalServiceTransport()
config = GatewayConfig(
    # probability 1.0 means every binding attempt returns prose, truncated
    # JSON, wrong types, or a forbidden operation, exhausting the retries
    backend=BackendConfig(kind="mock", fault_probability=1.0, fault_seed=3),
)
gateway = Gateway(config, transport=transport)
register_calculator(gateway.services, transport)
auth_key = gateway.add_user("ada", ["calculator"], ["13B"])

response = gateway.handle_chat(auth_key, "s1", "Would you add 10 and 45?")
print("status:  ", response["status"])
print("question:", response["clarification_question"])

# the graph is parked server-side, waiting on this request id
request_id = response["request_id"]
state = gateway.describe_request(auth_key, request_id)
print("graph:   ", state["graph"]["status"])

# the user answers the question; the reply is parsed (or re-bound by the
# model) and the remaining nodes run to completion
resumed = gateway.resume(auth_key, request_id, "use 10 and 45")
print("\nafter resume:")
print("status:  ", resumed["status"])
print("answer:  ", resumed["answer"])

# a graph resumes once; answering again is a conflict, not a rerun
try:
    gateway.resume(auth_key, request_id, "use 10 and 45")
except Exception as exc:
    print("resuming twice:", type(exc).__name__, "-", exc)
