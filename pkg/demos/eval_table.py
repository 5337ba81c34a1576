"""
Scoring the pipeline against the bare model, and measuring contention
=====================================================================

The harness builds seeded natural-language arithmetic prompts at several
operand counts and scores two paths: asking the model directly (baseline)
and going through the full middleware pipeline. On the deterministic mock
backend both are exact; against a live model the baseline collapses as
operand count grows while the pipeline stays near-perfect. Run the live
variant with:

    promptgate eval --arities 2,3,5,10,15,20 --n 100 \
        --live-url http://localhost:11434 --model llama2:13b
"""

from promptgate.evalharness import (
    EvalSettings,
    format_table,
    run_contention,
    run_eval,
)

# the mock backend isolates the middleware path, so this is fast and exact
report = run_eval(EvalSettings(arities=(2, 3, 5, 10, 15, 20), trials=50, seed=20240601))
print(format_table(report))

# mean latency grows once concurrent callers fight over one admission slot
print("\ncontention (single admission slot, simulated 20 ms service time):")
for point in run_contention(process_counts=(1, 2, 3), trials_per_process=8):
    print(
        f"  {point.processes} caller(s): mean latency "
        f"{point.mean_latency_s * 1000:.1f} ms over {point.trials} chats"
    )
