"""Accuracy and latency harness for the calculator pipeline.

Generates seeded natural-language arithmetic prompts at fixed operand counts
and scores two paths against ground truth: the bare model (baseline) and the
full middleware pipeline (route, bind, invoke, present). Also measures how
mean latency behaves as concurrent callers contend for a single model slot.

The semantic cache is disabled during evaluation: distinct prompts built
from the same tokens in a different order (common with permuted operands)
embed identically under bag-of-words hashing, and a near-duplicate cache hit
would score a stale answer instead of the pipeline under test.
"""

from __future__ import annotations

import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backends import BackendConfig, direct_prompt, make_backend
from .calculator import compute, register_calculator
from .config import CacheConfig, GatewayConfig, WorkerConfig
from .gateway import Gateway
from .services import LocalServiceTransport

_INT = re.compile(r"-?\d+")

DEFAULT_ARITIES = (2, 3, 5, 10, 15, 20)

# One joiner per phrasing; operand text order always equals fold order.
_TEMPLATES = {
    "add": (
        lambda ns: f"Add {' and '.join(ns)}.",
        lambda ns: f"What is {' plus '.join(ns)}?",
        lambda ns: f"Would you add {' and '.join(ns)}?",
        lambda ns: f"Compute the total of {' and '.join(ns)}.",
        lambda ns: f"Add {' to '.join(ns)}.",
    ),
    "subtract": (
        lambda ns: f"Subtract {' minus '.join(ns)}.",
        lambda ns: f"What is {' minus '.join(ns)}?",
        lambda ns: f"Compute {' minus '.join(ns)}.",
        lambda ns: f"Take {' minus '.join(ns)}.",
        lambda ns: f"What do you get for {' minus '.join(ns)}?",
    ),
    "multiply": (
        lambda ns: f"Multiply {' by '.join(ns)}.",
        lambda ns: f"What is {' times '.join(ns)}?",
        lambda ns: f"What is the product of {' and '.join(ns)}?",
        lambda ns: f"Work out {' times '.join(ns)}.",
        lambda ns: f"Multiply {' and '.join(ns)}.",
    ),
}


@dataclass(frozen=True)
class EvalCase:
    prompt: str
    operation: str
    numbers: tuple[int, ...]
    expected: int


@dataclass(frozen=True)
class EvalSettings:
    arities: tuple[int, ...] = DEFAULT_ARITIES
    trials: int = 100
    seed: int = 20240601
    backend: BackendConfig | None = None  # None -> deterministic mock
    concurrency: int = 1
    run_baseline: bool = True


@dataclass
class ArityResult:
    arity: int
    trials: int
    baseline_correct: int
    pipeline_correct: int
    baseline_latency_s: float
    pipeline_latency_s: float
    failures: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    settings: EvalSettings
    results: list[ArityResult]
    elapsed_s: float
    backend_kind: str


def build_corpus(arity: int, trials: int, seed: int) -> list[EvalCase]:
    """Seeded prompts with known answers; same inputs, same corpus."""
    if arity < 2:
        raise ValueError("arity must be at least 2")
    rng = random.Random(f"{seed}:{arity}")
    operations = sorted(_TEMPLATES)
    cases = []
    for _ in range(trials):
        operation = rng.choice(operations)
        numbers = tuple(rng.randint(1, 999) for _ in range(arity))
        template = rng.choice(_TEMPLATES[operation])
        prompt = template([str(n) for n in numbers])
        cases.append(EvalCase(prompt, operation, numbers, compute(operation, list(numbers))))
    return cases


def parse_final_int(text: str | None) -> int | None:
    if not text:
        return None
    matches = _INT.findall(text)
    return int(matches[-1]) if matches else None


def _eval_gateway(backend: BackendConfig | None) -> tuple[Gateway, str]:
    transport = LocalServiceTransport()
    config = GatewayConfig(
        backend=backend or BackendConfig(kind="mock"),
        cache=CacheConfig(enabled=False),
        workers=(WorkerConfig("w0", "13B", 40_000_000_000),),
    )
    gateway = Gateway(config, transport=transport)
    register_calculator(gateway.services, transport)
    auth_key = gateway.add_user("eval", ["calculator"], ["13B"])
    return gateway, auth_key


def run_eval(settings: EvalSettings | None = None) -> EvalReport:
    settings = settings or EvalSettings()
    started = time.time()
    results = []
    # report rows always come out sorted by operand count, whatever order was asked for
    for arity in sorted(set(settings.arities)):
        results.append(_run_arity(settings, arity))
    backend_kind = (settings.backend or BackendConfig()).kind
    return EvalReport(settings, results, time.time() - started, backend_kind)


def _run_arity(settings: EvalSettings, arity: int) -> ArityResult:
    cases = build_corpus(arity, settings.trials, settings.seed)
    gateway, auth_key = _eval_gateway(settings.backend)
    failures: list[str] = []
    latencies: list[float] = []

    def pipeline_one(indexed: tuple[int, EvalCase]) -> bool:
        i, case = indexed
        t0 = time.time()
        response = gateway.handle_chat(auth_key, f"eval-{arity}-{i}", case.prompt)
        latencies.append(time.time() - t0)
        value = parse_final_int(response.get("answer"))
        if response["status"] == "ok" and value == case.expected:
            return True
        failures.append(
            f"{case.prompt!r}: status={response['status']} "
            f"got={value} want={case.expected}"
        )
        return False

    if settings.concurrency > 1:
        with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
            outcomes = list(pool.map(pipeline_one, enumerate(cases)))
    else:
        outcomes = [pipeline_one(item) for item in enumerate(cases)]
    pipeline_correct = sum(outcomes)

    baseline_correct = 0
    baseline_latencies: list[float] = []
    if settings.run_baseline:
        backend = gateway.backend
        for case in cases:
            t0 = time.time()
            reply = backend.complete(direct_prompt(case.prompt))
            baseline_latencies.append(time.time() - t0)
            if parse_final_int(reply) == case.expected:
                baseline_correct += 1

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    return ArityResult(
        arity=arity,
        trials=settings.trials,
        baseline_correct=baseline_correct,
        pipeline_correct=pipeline_correct,
        baseline_latency_s=mean(baseline_latencies),
        pipeline_latency_s=mean(latencies),
        failures=failures[:10],
    )


def format_table(report: EvalReport) -> str:
    """Aligned text table: one row per operand count, both modes scored and timed."""
    header = (
        f"{'operands':>8} | {'baseline':>8} | {'pipeline':>8} "
        f"| {'base latency':>12} | {'pipe latency':>12}"
    )
    rule = "-" * len(header)
    lines = [
        f"backend: {report.backend_kind} | trials per row: {report.settings.trials} "
        f"| seed: {report.settings.seed} | concurrency: {report.settings.concurrency}",
        header,
        rule,
    ]
    for row in report.results:
        lines.append(
            f"{row.arity:>8} | {row.baseline_correct:>4}/{row.trials:<3} "
            f"| {row.pipeline_correct:>4}/{row.trials:<3} "
            f"| {row.baseline_latency_s:>10.3f}s "
            f"| {row.pipeline_latency_s:>10.3f}s"
        )
    lines.append(rule)
    lines.append(f"total elapsed: {report.elapsed_s:.2f}s")
    return "\n".join(lines)


def to_csv(report: EvalReport) -> str:
    lines = [
        "arity,trials,baseline_correct,pipeline_correct,"
        "baseline_latency_s,pipeline_latency_s"
    ]
    for row in report.results:
        lines.append(
            f"{row.arity},{row.trials},{row.baseline_correct},{row.pipeline_correct},"
            f"{row.baseline_latency_s:.6f},{row.pipeline_latency_s:.6f}"
        )
    return "\n".join(lines)


@dataclass
class ContentionPoint:
    processes: int
    trials: int
    mean_latency_s: float


def run_contention(
    process_counts: tuple[int, ...] = (1, 2, 3),
    trials_per_process: int = 10,
    simulated_latency_s: float = 0.02,
    seed: int = 77,
) -> list[ContentionPoint]:
    """Mean chat latency as N callers share one admission slot.

    The backend allows a single in-flight completion with a fixed simulated
    service time, so queueing delay (and thus mean latency) must grow with
    the number of concurrent callers.
    """
    points = []
    for processes in process_counts:
        backend = BackendConfig(
            kind="mock",
            max_concurrent=1,
            simulated_latency_s=simulated_latency_s,
        )
        gateway, auth_key = _eval_gateway(backend)
        cases = build_corpus(2, trials_per_process, seed)
        latencies: list[float] = []

        def caller(worker_index: int) -> None:
            for i, case in enumerate(cases):
                t0 = time.time()
                gateway.handle_chat(auth_key, f"c{worker_index}", case.prompt)
                latencies.append(time.time() - t0)

        with ThreadPoolExecutor(max_workers=processes) as pool:
            list(pool.map(caller, range(processes)))
        points.append(
            ContentionPoint(
                processes=processes,
                trials=len(latencies),
                mean_latency_s=sum(latencies) / len(latencies),
            )
        )
    return points
