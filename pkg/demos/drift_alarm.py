"""
Input drift: noticing when live traffic stops looking like the reference
=========================================================================

The detector accumulates a reference centroid from early traffic, then
judges full live windows by centroid cosine distance. Digits are stripped
before embedding (operand churn is not "drift"), so same-vocabulary
arithmetic stays quiet while a topic shift trips the alarm.
"""

import random

from promptgate.embedding import embed, tokenize
from promptgate.tracing import DriftDetector

DIMENSION = 128

detector = DriftDetector(
    dimension=DIMENSION,
    window=50,
    threshold=0.30,
    min_reference=30,
    min_live=50,
)


def observe(prompt):
    # same preprocessing the gateway applies on every chat
    words = " ".join(t for t in tokenize(prompt) if not t.isdigit())
    return embed(words, DIMENSION)


rng = random.Random(7)
arithmetic = ["add", "plus", "sum", "total", "and", "numbers", "what", "is"]
legal = ["contract", "clause", "liability", "party", "terms", "breach", "court"]


def sentence(vocab):
    words = [rng.choice(vocab) for _ in range(6)]
    words.append(str(rng.randint(1, 999)))  # digits get stripped anyway
    return " ".join(words)


# phase 1: seed the reference with normal arithmetic chatter
for _ in range(40):
    detector.add_reference(observe(sentence(arithmetic)))
print("reference size:", detector.reference_count)

# phase 2: more of the same vocabulary stays quiet
alarms = sum(1 for _ in range(80) if detector.drift_check(observe(sentence(arithmetic))).alarmed)
print("alarms on same-distribution traffic:", alarms)

# phase 3: the user base pivots to legal questions; the centroid walks away
for i in range(80):
    verdict = detector.drift_check(observe(sentence(legal)))
    if verdict.alarmed:
        print(f"alarm after {i + 1} shifted prompts, distance={verdict.distance:.3f}")
        break
print("final state:", detector.snapshot())
