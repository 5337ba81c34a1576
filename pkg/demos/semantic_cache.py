"""
Semantic prompt cache: repeats and rephrasings skip the pipeline
================================================================

The cache key is the embedded prompt, scoped to (user, certificate,
registry version, backend). An exact repeat hits trivially; a rephrasing
hits when its bag-of-words embedding is close enough; another user never
sees either entry.
"""

from promptgate import Gateway, GatewayConfig
from promptgate.calculator import register_calculator
from promptgate.services import LocalServiceTransport

transport = LocalServiceTransport()
gateway = Gateway(GatewayConfig(), transport=transport)
register_calculator(gateway.services, transport)
ada = gateway.add_user("ada", ["calculator"], ["13B"])
ben = gateway.add_user("ben", ["calculator"], ["13B"])


def show(tag, response):
    print(f"{tag:<22} hit={response['cache_hit']!s:<5} answer={response['answer']}")


# first ask pays full price and seeds the cache
show("first ask", gateway.handle_chat(ada, "s1", "Would you add 10 and 45?"))

# exact repeat: nothing below the cache runs, not even the scheduler
show("exact repeat", gateway.handle_chat(ada, "s1", "Would you add 10 and 45?"))

# a reordering of the same words embeds identically under bag-of-words
# hashing, so it hits too; the stored answer is still correct because
# addition commutes, which is exactly the bet a 0.95 threshold makes
show("rephrased", gateway.handle_chat(ada, "s1", "Would you add 45 and 10?"))

# ben shares no scope with ada, so his first ask misses
show("other user", gateway.handle_chat(ben, "s1", "Would you add 10 and 45?"))

# registering any service bumps the registry version and retires old scopes:
# stale answers cannot outlive a routing change
from promptgate.services import ProcedureSpec, ServiceDescriptor, SlotSpec

gateway.services.register(
    ServiceDescriptor(
        name="echo",
        description="Repeats text back.",
        utterances=("echo {text}",),
        procedures=(ProcedureSpec("say", (SlotSpec("text", "string"),), "Echo."),),
        endpoint="local://echo",
    )
)
show("after registry bump", gateway.handle_chat(ada, "s1", "Would you add 10 and 45?"))

stats = gateway.admin_cache()["prompt_cache"]
print(f"\ncache entries={stats['entries']} hits={stats['hits']} misses={stats['misses']}")
