"""End-to-end acceptance checks, one test per shipping requirement.

Each test exercises a whole subsystem at its stated tolerance and prints a
single PASS line on success, so `pytest -v tests/test_acceptance.py` reads
as a checklist. The live-backend reproduction is opt-in: set
PROMPTGATE_LIVE_URL (and optionally PROMPTGATE_LIVE_MODEL) to run it.
"""

import os
import random
import time
from collections import defaultdict

import numpy as np
import pytest

from promptgate import Gateway, GatewayConfig, LocalServiceTransport
from promptgate.backends import BackendConfig, MockBackend
from promptgate.caching import PromptCache
from promptgate.calculator import register_calculator
from promptgate.config import CacheConfig, WorkerConfig
from promptgate.embedding import embed
from promptgate.evalharness import EvalSettings, run_contention, run_eval
from promptgate.execution import AWAITING, GRAPH_FAILED, SUCCEEDED, Executor
from promptgate.routing import Router, RouterConfig, VectorIndex
from promptgate.scheduling import FifoScheduler, ScheduledRequest, estimate_session_bytes
from promptgate.services import (
    ProcedureSpec,
    ServiceDescriptor,
    ServiceRegistry,
    SlotSpec,
)
from promptgate.tracing import DriftDetector, TraceStore

LIVE_URL = os.environ.get("PROMPTGATE_LIVE_URL")

# ten services with disjoint core vocabulary, one numeric slot each
_SERVICE_WORDS = [
    ("mailer", "send", "letter"),
    ("player", "play", "song"),
    ("heater", "warm", "bedroom"),
    ("lights", "dim", "lamp"),
    ("barista", "brew", "coffee"),
    ("garden", "water", "fern"),
    ("valet", "park", "car"),
    ("feeder", "feed", "cat"),
    ("laundry", "fold", "shirt"),
    ("locks", "bolt", "door"),
]

_UTTERANCE_TEMPLATES = (
    "{verb} the {noun} {{a}}",
    "please {verb} {noun} {{a}} now",
    "can you {verb} my {noun} {{a}}",
    "{verb} {noun} number {{a}}",
    "i want to {verb} a {noun} {{a}}",
)


def _toy_service(name: str, verb: str, noun: str) -> ServiceDescriptor:
    return ServiceDescriptor(
        name=name,
        description=f"{verb}s the {noun}",
        utterances=tuple(t.format(verb=verb, noun=noun) for t in _UTTERANCE_TEMPLATES),
        procedures=(ProcedureSpec(verb, (SlotSpec("a", "number"),)),),
        endpoint=f"local://{name}",
        worker_class="13B",
    )


def _ok(label: str) -> None:
    print(f"PASS {label}")


class TestCriterion01MockAccuracy:
    def test_pipeline_is_perfect_at_every_operand_count(self):
        started = time.time()
        report = run_eval(
            EvalSettings(arities=(2, 3, 5, 10, 15, 20), trials=100, run_baseline=False)
        )
        elapsed = time.time() - started
        for row in report.results:
            assert row.pipeline_correct == 100, (
                f"arity {row.arity}: {row.pipeline_correct}/100, "
                f"failures: {row.failures[:3]}"
            )
        assert elapsed < 60, f"took {elapsed:.1f}s, budget is 60s"
        _ok(
            "criterion 1: mock pipeline 100/100 at operand counts "
            f"2,3,5,10,15,20 in {elapsed:.1f}s"
        )


@pytest.mark.skipif(not LIVE_URL, reason="PROMPTGATE_LIVE_URL not set")
class TestCriterion02LiveReproduction:
    # reference accuracies recorded for llama2:13b, tolerance +/- 5 per cell
    REFERENCE = {
        2: (86, 100),
        3: (37, 100),
        5: (1, 93),
        10: (0, 97),
        15: (0, 99),
        20: (0, 99),
    }

    def test_live_backend_matches_reference_envelope(self):
        backend = BackendConfig(
            kind="http",
            base_url=LIVE_URL,
            model_name=os.environ.get("PROMPTGATE_LIVE_MODEL", "llama2:13b"),
            timeout_s=120.0,
        )
        report = run_eval(
            EvalSettings(arities=tuple(self.REFERENCE), trials=100, backend=backend)
        )
        for row in report.results:
            want_baseline, want_pipeline = self.REFERENCE[row.arity]
            assert abs(row.baseline_correct - want_baseline) <= 5, (
                f"arity {row.arity} baseline {row.baseline_correct} "
                f"vs reference {want_baseline}"
            )
            assert abs(row.pipeline_correct - want_pipeline) <= 5, (
                f"arity {row.arity} pipeline {row.pipeline_correct} "
                f"vs reference {want_pipeline}"
            )
        _ok("criterion 2: live accuracies within +/-5 of the reference run")


class TestCriterion03SessionMemoryEstimates:
    def test_exact_values(self):
        assert estimate_session_bytes("70B", 8192) == 35_225_600_000
        assert estimate_session_bytes("13B", 1) == 800_000
        assert estimate_session_bytes("70B", 1) == 4_300_000
        _ok("criterion 3: session memory estimates exact for 13B and 70B")


class TestCriterion04RoutingRetrieval:
    def test_self_retrieval_and_knn_oracle(self):
        registry = ServiceRegistry(transport=LocalServiceTransport())
        for name, verb, noun in _SERVICE_WORDS:
            registry.register(_toy_service(name, verb, noun))
        backend = MockBackend(BackendConfig(kind="mock"))
        router = Router(registry, backend, RouterConfig())

        rng = random.Random(20240601)
        trials = 1000
        correct = 0
        for _ in range(trials):
            name, verb, noun = rng.choice(_SERVICE_WORDS)
            template = rng.choice(_UTTERANCE_TEMPLATES)
            prompt = template.format(verb=verb, noun=noun).replace(
                "{a}", str(rng.randint(1, 999))
            )
            decision = router.route(prompt)
            if not decision.abstained and decision.service == name:
                correct += 1
        rate = correct / trials
        assert rate >= 0.98, f"top-1 self-retrieval {correct}/{trials}"

        # exhaustive-scan oracle, coded independently of VectorIndex
        index = VectorIndex(dimension=128)
        vocab = [f"word{i}" for i in range(40)]
        for i in range(60):
            index.add(f"svc{i % 9}", " ".join(rng.choice(vocab) for _ in range(6)))
        for trial in range(100):
            query = embed(" ".join(rng.choice(vocab) for _ in range(5)), 128)
            k = rng.randint(1, 10)
            got = [(e.service, e.utterance, s) for e, s in index.knn(query, k)]
            scored = [
                (float(np.dot(query, entry.vector)), pos, entry.service, entry.utterance)
                for pos, entry in enumerate(index.entries())
            ]
            scored.sort(key=lambda t: (-t[0], t[1]))
            want = [(svc, utt, score) for score, _, svc, utt in scored[:k]]
            assert got == want, f"knn diverged from full scan on trial {trial}"
        _ok(
            f"criterion 4: top-1 self-retrieval {correct}/{trials} (>=98%), "
            "knn identical to full-scan oracle on 100 queries"
        )


class TestCriterion05PermissionSafety:
    def test_ten_thousand_chats_never_escape_certificates(self):
        class RecordingTransport(LocalServiceTransport):
            def __init__(self):
                super().__init__()
                self.calls = []

            def send(self, endpoint, payload):
                self.calls.append((endpoint, payload))
                return super().send(endpoint, payload)

        transport = RecordingTransport()
        all_verbs = tuple(verb for _, verb, _ in _SERVICE_WORDS)
        config = GatewayConfig(
            cache=CacheConfig(enabled=False),
            backend=BackendConfig(
                kind="mock",
                fault_probability=0.25,
                fault_seed=11,
                adversarial_operations=all_verbs + ("wipe_disk",),
            ),
        )
        gateway = Gateway(config, transport=transport)
        register_calculator(gateway.services, transport)
        endpoint_service = {"local://calculator": "calculator"}
        for name, verb, noun in _SERVICE_WORDS:
            gateway.register_service(_toy_service(name, verb, noun))
            transport.bind(
                f"local://{name}",
                lambda payload, name=name: {"ok": True, "result": f"{name} done"},
            )
            endpoint_service[f"local://{name}"] = name

        rng = random.Random(50_000)
        service_names = ["calculator"] + [name for name, _, _ in _SERVICE_WORDS]
        users = {}
        for i in range(8):
            allowed = set(rng.sample(service_names, rng.randint(0, len(service_names))))
            key = gateway.add_user(f"user{i}", sorted(allowed), ["13B"])
            users[key] = allowed

        def prompt_for(target: str) -> str:
            if target == "calculator":
                return f"Would you add {rng.randint(1, 99)} and {rng.randint(1, 99)}?"
            name, verb, noun = next(w for w in _SERVICE_WORDS if w[0] == target)
            template = rng.choice(_UTTERANCE_TEMPLATES)
            return template.format(verb=verb, noun=noun).replace(
                "{a}", str(rng.randint(1, 999))
            )

        violations = []
        parked = []
        chats = 10_000
        keys = list(users)
        for i in range(chats):
            key = rng.choice(keys)
            allowed = users[key]
            target = rng.choice(service_names + ["offtopic"])
            prompt = (
                "what should i cook for dinner tonight"
                if target == "offtopic"
                else prompt_for(target)
            )
            before = len(transport.calls)
            response = gateway.handle_chat(key, f"s{rng.randint(0, 3)}", prompt)
            for endpoint, payload in transport.calls[before:]:
                service = endpoint_service[endpoint]
                if service not in allowed:
                    violations.append((prompt, service, payload))
            routing = response.get("routing") or {}
            if routing.get("service") and routing["service"] not in allowed:
                violations.append((prompt, routing["service"], "routed"))
            if response["status"] == "awaiting_user":
                parked.append((key, response["request_id"]))

        for key, request_id in parked[:50]:
            allowed = users[key]
            before = len(transport.calls)
            try:
                gateway.resume(key, request_id, f"use {rng.randint(1, 99)}")
            except Exception:
                pass
            for endpoint, payload in transport.calls[before:]:
                service = endpoint_service[endpoint]
                if service not in allowed:
                    violations.append(("resume", service, payload))

        assert not violations, f"{len(violations)} escapes, first: {violations[:3]}"
        _ok(
            f"criterion 5: {chats} fuzzed chats (+{min(len(parked), 50)} resumes) "
            "with adversarial bindings, zero certificate escapes"
        )


class TestCriterion06SchedulerDiscipline:
    def test_fifo_sticky_and_budget_over_random_workloads(self):
        rng = random.Random(616)
        for round_no in range(1000):
            traces = TraceStore()
            sched = FifoScheduler(traces=traces)
            classes = ["13B", "70B"]
            worker_count = rng.randint(1, 3)
            for i in range(worker_count):
                sched.add_worker(f"w{i}", classes[i % 2], 10_000)
            available = {classes[i % 2] for i in range(worker_count)}
            session_class = {
                f"sess{j}": classes[j % 2]
                for j in range(rng.randint(1, 5))
                if classes[j % 2] in available
            }
            if not session_class:
                continue
            submitted = []
            for i in range(rng.randint(3, 25)):
                session = rng.choice(sorted(session_class))
                request = ScheduledRequest(
                    request_id=f"r{round_no}-{i}",
                    session_id=session,
                    model_class=session_class[session],
                )
                sched.submit(request)
                submitted.append(request.request_id)

            assigned = {}
            for rid in submitted:
                event = next(
                    e for e in traces.events_for(rid) if e.event == "submit"
                )
                assigned[rid] = event.attributes["worker"]
            per_session_workers = defaultdict(set)
            expected = defaultdict(list)
            for rid in submitted:
                expected[assigned[rid]].append(rid)
            completed = defaultdict(list)
            remaining = len(submitted)
            workers = sched.workers()
            while remaining:
                moved = False
                for wid in rng.sample(workers, len(workers)):
                    request = sched.dispatch(wid)
                    if request is None:
                        continue
                    completed[wid].append(request.request_id)
                    per_session_workers[request.session_id].add(wid)
                    sched.complete(request.request_id)
                    remaining -= 1
                    moved = True
                assert moved, "stalled"
            assert completed == expected, f"round {round_no}: FIFO broken"
            for session, worker_set in per_session_workers.items():
                assert len(worker_set) == 1, f"session {session} wandered: {worker_set}"

        # memory budget invariant under random residency churn
        sched = FifoScheduler()
        sched.add_worker("w", "13B", 1_000)
        for step in range(500):
            size = rng.randint(50, 600)
            sched.load_model("w", f"m{rng.randint(0, 12)}", size)
            state = sched.snapshot()["workers"][0]
            assert state["resident_bytes"] <= 1_000, f"step {step} over budget"
        _ok(
            "criterion 6: FIFO order, session stickiness, and memory budget "
            "held over 1000 random workloads"
        )


class TestCriterion07CacheDiscipline:
    def test_isolation_repeat_hit_and_capacity(self):
        # scope isolation fuzz at a permissive threshold
        rng = random.Random(9090)
        cache = PromptCache(capacity=400, similarity_threshold=0.3)
        words = ["red", "green", "blue", "round", "flat", "tall", "loud", "soft"]
        for i in range(1000):
            scope = f"scope{rng.randint(0, 9)}"
            prompt = " ".join(rng.choice(words) for _ in range(rng.randint(2, 5)))
            if rng.random() < 0.5:
                cache.put(scope, prompt, {"scope": scope, "i": i})
            else:
                hit = cache.lookup(scope, prompt)
                if hit is not None:
                    assert hit.payload["scope"] == scope, "cross-scope leak"

        # an exact repeat answers from cache without any service invocation
        class RecordingTransport(LocalServiceTransport):
            def __init__(self):
                super().__init__()
                self.calls = []

            def send(self, endpoint, payload):
                self.calls.append((endpoint, payload))
                return super().send(endpoint, payload)

        transport = RecordingTransport()
        gateway = Gateway(GatewayConfig(), transport=transport)
        register_calculator(gateway.services, transport)
        key = gateway.add_user("alice", ["calculator"], ["13B"])
        prompt = "Would you add 10 and 45?"
        first = gateway.handle_chat(key, "s1", prompt)
        assert first["status"] == "ok" and len(transport.calls) == 1
        second = gateway.handle_chat(key, "s1", prompt)
        assert second["cache_hit"] is True
        assert second["answer"] == first["answer"]
        assert len(transport.calls) == 1, "cache hit still invoked the service"

        # capacity bound under churn
        bounded = PromptCache(capacity=100)
        for i in range(1000):
            bounded.put(f"s{i % 7}", f"prompt number {i} with filler", i)
            assert len(bounded) <= 100
        _ok(
            "criterion 7: scope isolation fuzz clean, exact repeat hit with "
            "zero invocations, capacity bound held"
        )


class TestCriterion08ExecutionLiveness:
    def test_thousand_faulty_runs_terminate_and_resume_round_trips(self):
        transport = LocalServiceTransport()
        registry = ServiceRegistry(transport=transport)
        register_calculator(registry, transport)
        terminal = {SUCCEEDED, GRAPH_FAILED, AWAITING}
        outcomes = defaultdict(int)
        for seed in range(1000):
            backend = MockBackend(
                BackendConfig(kind="mock", fault_probability=0.5, fault_seed=seed)
            )
            router = Router(registry, backend, RouterConfig())
            executor = Executor(registry, backend, binder=router.extract_parameters)
            a, b = (seed % 97) + 1, (seed % 89) + 2
            prompt = f"Would you add {a} and {b}?"
            graph = executor.run(
                executor.plan(f"r{seed}", prompt, router.route(prompt)),
                allowed_services={"calculator"},
            )
            assert graph.status in terminal, f"seed {seed}: {graph.status}"
            outcomes[graph.status] += 1
            if graph.status == SUCCEEDED:
                assert graph.answer == f"The result is {a + b}."
        assert outcomes[SUCCEEDED] > 0 and outcomes[AWAITING] > 0

        # pause -> human reply -> resume completes with the right arithmetic
        always_faulty = Gateway(
            GatewayConfig(
                backend=BackendConfig(kind="mock", fault_probability=1.0, fault_seed=7)
            ),
            transport=transport,
        )
        register_calculator(always_faulty.services, transport)
        key = always_faulty.add_user("alice", ["calculator"], ["13B"])
        parked = always_faulty.handle_chat(key, "s1", "Would you add 10 and 45?")
        assert parked["status"] == "awaiting_user"
        resumed = always_faulty.resume(key, parked["request_id"], "use 10 and 45")
        assert resumed["status"] == "ok"
        assert resumed["answer"] == "The result is 55."
        _ok(
            "criterion 8: 1000 fault-injected runs all terminal "
            f"({dict(outcomes)}), pause/resume round-trip exact"
        )


class TestCriterion09ContentionLatency:
    def test_mean_latency_non_decreasing_with_callers(self):
        points = run_contention(
            process_counts=(1, 2, 3), trials_per_process=8, simulated_latency_s=0.02
        )
        means = [p.mean_latency_s for p in points]
        assert means[0] <= means[1] <= means[2], f"latency not monotone: {means}"
        _ok(
            "criterion 9: mean latency grows with contention "
            f"({means[0]:.3f}s -> {means[1]:.3f}s -> {means[2]:.3f}s)"
        )


class TestCriterion10DriftDetection:
    VOCAB_A = [f"topic{i}" for i in range(40)]
    VOCAB_B = [f"other{i}" for i in range(40)]

    def _sentence(self, rng, vocab) -> str:
        return " ".join(rng.choice(vocab) for _ in range(6))

    def _detector(self):
        # judge only full live windows: a handful of live samples is noise
        return DriftDetector(
            dimension=128, window=50, threshold=0.30, min_reference=30, min_live=50
        )

    def test_same_distribution_quiet_disjoint_alarms(self):
        for seed in range(100):
            rng = random.Random(seed)
            detector = self._detector()
            for _ in range(40):
                detector.add_reference(embed(self._sentence(rng, self.VOCAB_A), 128))
            alarms = sum(
                detector.drift_check(embed(self._sentence(rng, self.VOCAB_A), 128)).alarmed
                for _ in range(80)
            )
            assert alarms == 0, f"seed {seed}: false alarm on same distribution"

        alarmed_runs = 0
        for seed in range(100):
            rng = random.Random(1000 + seed)
            detector = self._detector()
            for _ in range(40):
                detector.add_reference(embed(self._sentence(rng, self.VOCAB_A), 128))
            if any(
                detector.drift_check(embed(self._sentence(rng, self.VOCAB_B), 128)).alarmed
                for _ in range(80)
            ):
                alarmed_runs += 1
        assert alarmed_runs == 100, f"disjoint vocabulary alarmed {alarmed_runs}/100"
        _ok(
            "criterion 10: 0/100 false alarms on matching traffic, "
            "100/100 alarms on disjoint vocabulary at threshold 0.30"
        )
