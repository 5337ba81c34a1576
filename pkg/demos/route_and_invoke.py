"""
Routing a chat prompt to a registered service
=============================================

The smallest end-to-end story: build a gateway on the deterministic mock
backend, register the calculator service, create a user, and watch one
prompt travel the whole pipeline (route, bind, invoke, present).
"""

from promptgate import Gateway, GatewayConfig
from promptgate.calculator import register_calculator
from promptgate.services import LocalServiceTransport

# the transport is the in-process stand-in for "the network": the calculator
# binds a handler on it, and the registry invokes through it
transport = LocalServiceTransport()
gateway = Gateway(GatewayConfig(), transport=transport)
register_calculator(gateway.services, transport)

# each user gets an auth key plus a certificate naming what they may touch
auth_key = gateway.add_user("ada", ["calculator"], ["13B"])

response = gateway.handle_chat(auth_key, "demo", "Would you add 10 and 45?")
print("status: ", response["status"])
print("answer: ", response["answer"])
print("routing:", response["routing"]["service"], "->", response["routing"]["operations"])
print("worker: ", response["worker"])

# the same prompt with three operands still folds left to right
response = gateway.handle_chat(auth_key, "demo", "Add 5 to 3 to 2.")
print("\nchained:", response["answer"])

# prompts no service claims fall through to a direct model answer
response = gateway.handle_chat(auth_key, "demo", "tell me a story about boats")
print("\nabstained:", response["routing"]["abstained"], "->", response["answer"])

# every response carries a request id that resolves to a full trace
events = gateway.trace_events(response["request_id"])
print("\ntrace of the last request:")
for event in events:
    print(f"  {event['component']:>16} {event['event']}")
