"""Set and term-frequency similarities over token sequences."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

TERM_METRICS = ("jaccard", "sorensen-dice", "overlap", "cosine", "ochiai")


def term_similarity(metric: str, tokens_a: Sequence[str], tokens_b: Sequence[str]) -> float:
    """Similarity of two token sequences in [0, 1].

    The set metrics (Jaccard, Sorensen-Dice, Overlap, Ochiai) use distinct
    tokens; ``cosine`` compares term-frequency vectors.
    """
    if metric not in TERM_METRICS:
        raise ValueError(f"unknown term metric {metric!r}")
    if not tokens_a and not tokens_b:
        return 1.0
    if not tokens_a or not tokens_b:
        return 0.0
    if metric == "cosine":
        ca, cb = Counter(tokens_a), Counter(tokens_b)
        dot = sum(v * cb[k] for k, v in ca.items() if k in cb)
        norm = math.sqrt(sum(v * v for v in ca.values()) * sum(v * v for v in cb.values()))
        return min(1.0, dot / norm)
    A, B = set(tokens_a), set(tokens_b)
    inter = len(A & B)
    if metric == "jaccard":
        return inter / len(A | B)
    if metric == "sorensen-dice":
        return 2 * inter / (len(A) + len(B))
    if metric == "overlap":
        return inter / min(len(A), len(B))
    return min(1.0, inter / math.sqrt(len(A) * len(B)))
