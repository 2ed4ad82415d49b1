"""Character-based similarity metrics, each normalized to [0, 1].

The quadratic dynamic programs run as numba kernels over code-point arrays.
Sentences are compared on their full normalized character stream, spaces
included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "CharMetric", "CHAR_METRICS", "char_similarity", "hamming_distance",
    "levenshtein_distance", "damerau_levenshtein_distance", "jaro", "jaro_winkler",
    "needleman_wunsch_score", "smith_waterman_score", "lcs_subsequence_length",
    "lcs_substring_length",
]

CHAR_METRICS = (
    "hamming", "levenshtein", "damerau-levenshtein", "jaro", "jaro-winkler",
    "needleman-wunsch", "smith-waterman", "lcsseq", "lcsstr",
)


@dataclass(frozen=True)
class CharMetric:
    """A character metric plus its scoring parameters.

    ``prefix_weight``/``max_prefix`` only affect Jaro-Winkler; ``match``,
    ``mismatch`` and ``gap`` only affect the two alignment scores.
    """

    name: str
    prefix_weight: float = 0.1
    max_prefix: int = 4
    match: float = 1.0
    mismatch: float = -1.0
    gap: float = -1.0

    def __post_init__(self):
        if self.name not in CHAR_METRICS:
            raise ValueError(f"unknown character metric {self.name!r}")
        if not 0 < self.prefix_weight <= 0.25:
            raise ValueError("prefix_weight must lie in (0, 0.25]")
        if not 0 <= self.max_prefix <= 4:
            raise ValueError("max_prefix must lie in [0, 4]")
        if not (self.match > 0 >= self.mismatch and self.match > 0 >= self.gap):
            raise ValueError("alignment scores need match > 0 >= mismatch, gap")


def _codes(s: str) -> np.ndarray:
    return np.fromiter((ord(c) for c in s), dtype=np.int32, count=len(s))


@njit(cache=True)
def _levenshtein(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            cur[j] = v
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _osa(a, b):
    # restricted Damerau: adjacent transpositions, no edits inside a transposed pair
    n, m = a.shape[0], b.shape[0]
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            v = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                v = min(v, d[i - 2, j - 2] + 1)
            d[i, j] = v
    return d[n, m]


@njit(cache=True)
def _alignment(a, b, match, mismatch, gap, local):
    n, m = a.shape[0], b.shape[0]
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    best = 0.0
    for j in range(m + 1):
        prev[j] = 0.0 if local else j * gap
    for i in range(1, n + 1):
        cur[0] = 0.0 if local else i * gap
        for j in range(1, m + 1):
            s = match if a[i - 1] == b[j - 1] else mismatch
            v = max(prev[j - 1] + s, prev[j] + gap, cur[j - 1] + gap)
            if local:
                if v < 0.0:
                    v = 0.0
                if v > best:
                    best = v
            cur[j] = v
        prev, cur = cur, prev
    return best if local else prev[m]


@njit(cache=True)
def _lcs_seq(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _lcs_str(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    best = 0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
            else:
                cur[j] = 0
        prev, cur = cur, prev
    return best


def hamming_distance(a: str, b: str) -> int:
    """Mismatches over the shorter length plus the length difference."""
    return sum(x != y for x, y in zip(a, b)) + abs(len(a) - len(b))


def levenshtein_distance(a: str, b: str) -> int:
    return int(_levenshtein(_codes(a), _codes(b)))


def damerau_levenshtein_distance(a: str, b: str) -> int:
    return int(_osa(_codes(a), _codes(b)))


def needleman_wunsch_score(a: str, b: str, match=1.0, mismatch=-1.0, gap=-1.0) -> float:
    return float(_alignment(_codes(a), _codes(b), float(match), float(mismatch), float(gap), False))


def smith_waterman_score(a: str, b: str, match=1.0, mismatch=-1.0, gap=-1.0) -> float:
    return float(_alignment(_codes(a), _codes(b), float(match), float(mismatch), float(gap), True))


def lcs_subsequence_length(a: str, b: str) -> int:
    return int(_lcs_seq(_codes(a), _codes(b)))


def lcs_substring_length(a: str, b: str) -> int:
    return int(_lcs_str(_codes(a), _codes(b)))


def jaro(a: str, b: str) -> float:
    la, lb = len(a), len(b)
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 or lb == 0:
        return 0.0
    window = max(max(la, lb) // 2 - 1, 0)
    a_hit = [False] * la
    b_hit = [False] * lb
    matches = 0
    for i, ch in enumerate(a):
        for j in range(max(0, i - window), min(lb, i + window + 1)):
            if not b_hit[j] and b[j] == ch:
                a_hit[i] = b_hit[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    a_seq = [c for c, hit in zip(a, a_hit) if hit]
    b_seq = [c for c, hit in zip(b, b_hit) if hit]
    half_transpositions = sum(x != y for x, y in zip(a_seq, b_seq))
    t = half_transpositions / 2
    return (matches / la + matches / lb + (matches - t) / matches) / 3


def jaro_winkler(a: str, b: str, prefix_weight: float = 0.1, max_prefix: int = 4) -> float:
    j = jaro(a, b)
    prefix = 0
    for x, y in zip(a[:max_prefix], b[:max_prefix]):
        if x != y:
            break
        prefix += 1
    return j + prefix * prefix_weight * (1.0 - j)


def char_similarity(metric: CharMetric | str, a: str, b: str) -> float:
    """Similarity of two character sequences under ``metric``, in [0, 1]."""
    if isinstance(metric, str):
        metric = CharMetric(metric)
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    longest = max(len(a), len(b))
    name = metric.name
    if name == "hamming":
        return 1.0 - hamming_distance(a, b) / longest
    if name == "levenshtein":
        return 1.0 - levenshtein_distance(a, b) / longest
    if name == "damerau-levenshtein":
        return 1.0 - damerau_levenshtein_distance(a, b) / longest
    if name == "jaro":
        return jaro(a, b)
    if name == "jaro-winkler":
        return jaro_winkler(a, b, metric.prefix_weight, metric.max_prefix)
    if name == "needleman-wunsch":
        score = needleman_wunsch_score(a, b, metric.match, metric.mismatch, metric.gap)
        top = longest * metric.match
        return min(1.0, max(0.0, (score + top) / (2 * top)))
    if name == "smith-waterman":
        score = smith_waterman_score(a, b, metric.match, metric.mismatch, metric.gap)
        return score / (metric.match * min(len(a), len(b)))
    if name == "lcsseq":
        return lcs_subsequence_length(a, b) / longest
    return lcs_substring_length(a, b) / longest
