"""Deterministic text embedding used for routing, caching, and drift checks.

The embedder is a hashed bag-of-words stand-in for a learned query/document
encoder: tokens are hashed into a fixed number of buckets and the bucket
counts are L2-normalized. It is order-insensitive by construction and
deterministic across processes, which the test suite and the replay
guarantees rely on.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

DEFAULT_DIMENSION = 256

# {slot} placeholders are dropped before tokenization so that an utterance
# template and a prompt instantiating it land close together in vector space.
_PLACEHOLDER = re.compile(r"\{[A-Za-z_][A-Za-z0-9_]*\}")
_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, strip slot placeholders, split on non-alphanumerics."""
    stripped = _PLACEHOLDER.sub(" ", text)
    return [t for t in _NON_ALNUM.split(stripped.lower()) if t]


def token_bucket(token: str, dimension: int) -> int:
    """Stable bucket for a token; independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dimension


def embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Embed text as L2-normalized hashed token counts.

    An input with no tokens (empty string, placeholders only) embeds to the
    all-zero vector, the single degenerate case callers must handle.
    """
    vec = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        vec[token_bucket(token, dimension)] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


def is_zero(vector: np.ndarray) -> bool:
    return not np.any(vector)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is all-zero."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
