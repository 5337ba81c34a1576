"""
FIFO scheduling with sticky sessions and a model-memory budget
==============================================================

One 13B worker and one 70B worker serve two users whose certificates
name different model classes. Requests dispatch in arrival order, each
session settles onto one worker and stays there, and placement prefers a
worker that already holds the model over an empty one: re-loading tens
of gigabytes costs far more than waiting out a queue.
"""

from concurrent.futures import ThreadPoolExecutor

from promptgate import Gateway, GatewayConfig
from promptgate.backends import BackendConfig
from promptgate.calculator import register_calculator
from promptgate.config import WorkerConfig
from promptgate.scheduling import estimate_session_bytes
from promptgate.services import LocalServiceTransport

transport = LocalServiceTransport()
config = GatewayConfig(
    # a little simulated model latency makes the runs overlap for real
    backend=BackendConfig(kind="mock", simulated_latency_s=0.02),
    workers=(
        WorkerConfig("w0", "13B", 40_000_000_000),
        WorkerConfig("w1", "70B", 160_000_000_000),
    ),
)
gateway = Gateway(config, transport=transport)
register_calculator(gateway.services, transport)

# ada may only use the 13B class; dee may only use the 70B class. The
# calculator pins 13B, so ada does arithmetic while dee's unrouted chat
# goes straight to the 70B model for a direct answer.
ada = gateway.add_user("ada", ["calculator"], ["13B"])
dee = gateway.add_user("dee", [], ["70B"])
lanes = [(ada, "red"), (ada, "green"), (dee, "blue"), (dee, "gold")]


# four sessions chat concurrently, three turns each
# (prompts must differ per turn: the prompt cache is per-user, and a repeat
# would answer from cache without touching the scheduler at all)
def converse(indexed):
    lane, (key, session) = indexed
    workers = []
    for turn in range(3):
        if key == ada:
            prompt = f"Add {10 * lane + turn + 1} and {turn + 2}."
        else:
            prompt = f"tell me fact number {10 * lane + turn} about owls"
        workers.append(gateway.handle_chat(key, session, prompt)["worker"])
    return session, workers


with ThreadPoolExecutor(max_workers=4) as pool:
    for session, workers in pool.map(converse, enumerate(lanes)):
        flapped = "" if len(set(workers)) == 1 else "  <- flapped!"
        print(f"session {session:>5} -> workers {workers}{flapped}")

snapshot = gateway.scheduler.snapshot()
print("\nsticky map:", snapshot["sticky_sessions"])
for worker in snapshot["workers"]:
    print(
        f"worker {worker['worker_id']} class={worker['worker_class']} "
        f"resident={worker['resident_models']} "
        f"bytes={worker['resident_bytes']:,}/{worker['memory_budget_bytes']:,}"
    )

# the capacity arithmetic behind those budgets: per-token session state
print("\nper-session KV bytes, 13B at 1 token:   ", f"{estimate_session_bytes('13B', 1):,}")
print("per-session KV bytes, 70B at 8192 tokens:", f"{estimate_session_bytes('70B', 8192):,}")
