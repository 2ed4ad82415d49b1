"""HAL co-occurrence vectors, word-vector files and vector similarities."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ._types import Score
from .corpus import WORD, tokenize

logger = logging.getLogger(__name__)

HAL_FORMAT_VERSION = 1
AGGREGATIONS = ("mean-vector", "best-match")


class VectorFileError(ValueError):
    pass


@dataclass(frozen=True)
class VectorMetric:
    name: str = "cosine"
    p: float = 3.0

    def __post_init__(self):
        if self.name not in ("cosine", "euclidean", "manhattan", "minkowski"):
            raise ValueError(f"unknown vector metric {self.name!r}")
        if self.p < 1:
            raise ValueError("Minkowski p must be >= 1")

    @property
    def label(self) -> str:
        if self.name == "minkowski":
            return f"minkowski{self.p:g}"
        return self.name


COSINE = VectorMetric("cosine")
EUCLIDEAN = VectorMetric("euclidean")
MANHATTAN = VectorMetric("manhattan")
MINKOWSKI3 = VectorMetric("minkowski", 3.0)


class WordVectors:
    """Token to vector lookup over a dense array or a sparse CSR matrix."""

    def __init__(self, vocab: Mapping[str, int], matrix, source: str = "file"):
        if matrix.shape[0] != len(vocab):
            raise ValueError("matrix rows must match vocabulary size")
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValueError("vectors need dimension >= 1")
        data = matrix.data if sp.issparse(matrix) else matrix
        if not np.all(np.isfinite(data)):
            raise ValueError("word vectors contain NaN or infinite entries")
        self.vocab = dict(vocab)
        self.matrix = matrix.tocsr() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        self.source = source

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[float]], source="file") -> "WordVectors":
        tokens = list(mapping)
        return cls({t: i for i, t in enumerate(tokens)},
                   np.array([mapping[t] for t in tokens], dtype=float), source)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, token) -> bool:
        return token in self.vocab

    def rows(self, tokens: Iterable[str]) -> np.ndarray:
        """Dense vectors for the in-vocabulary tokens, in order; OOV tokens skipped."""
        idx = [self.vocab[t] for t in tokens if t in self.vocab]
        if not idx:
            return np.zeros((0, self.dim))
        block = self.matrix[idx]
        return block.toarray() if sp.issparse(block) else np.array(block, dtype=float)

    def vector(self, token: str) -> np.ndarray:
        if token not in self.vocab:
            raise KeyError(token)
        return self.rows([token])[0]


@dataclass
class CooccurrenceModel:
    """Directional HAL counts: ``counts[t, c]`` accumulates weights for c following t."""

    vocab: dict[str, int]
    counts: sp.csr_matrix
    window: int
    min_count: int
    max_vocab: int

    @property
    def vectors(self) -> sp.csr_matrix:
        # row vector (t as predecessor) ++ column vector (t as successor)
        return sp.hstack([self.counts, self.counts.T], format="csr")

    def weight(self, t: str, c: str) -> float:
        return float(self.counts[self.vocab[t], self.vocab[c]])

    def to_word_vectors(self) -> WordVectors:
        return WordVectors(self.vocab, self.vectors, source="hal")

    def save(self, path: str | Path) -> None:
        tokens = sorted(self.vocab, key=self.vocab.__getitem__)
        m = self.counts.tocsr()
        m.sort_indices()
        with open(path, "wb") as fh:
            np.savez(fh, format_version=np.int64(HAL_FORMAT_VERSION),
                     tokens=np.array(tokens, dtype=str), data=m.data, indices=m.indices,
                     indptr=m.indptr, shape=np.array(m.shape, dtype=np.int64),
                     params=np.array([self.window, self.min_count, self.max_vocab], dtype=np.int64))

    @classmethod
    def load(cls, path: str | Path) -> "CooccurrenceModel":
        with np.load(path, allow_pickle=False) as z:
            version = int(z["format_version"])
            if version != HAL_FORMAT_VERSION:
                raise ValueError(f"unsupported HAL model version {version}")
            counts = sp.csr_matrix((z["data"], z["indices"], z["indptr"]), shape=tuple(z["shape"]))
            window, min_count, max_vocab = (int(v) for v in z["params"])
            vocab = {str(t): i for i, t in enumerate(z["tokens"])}
        return cls(vocab, counts, window, min_count, max_vocab)


def _corpus_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            yield tokenize(line, WORD)


def hal_counts(token_lines: Iterable[Sequence[str]], vocab: Mapping[str, int],
               window: int) -> Counter:
    """Weighted co-occurrence counts for one shard of the corpus.

    Distances are measured in the original token stream, so out-of-vocabulary
    tokens still occupy window positions. Shards merge by plain addition.
    """
    acc: Counter = Counter()
    for tokens in token_lines:
        ids = [vocab.get(t, -1) for t in tokens]
        n = len(ids)
        for i, ti in enumerate(ids):
            if ti < 0:
                continue
            for d in range(1, min(window, n - 1 - i) + 1):
                tj = ids[i + d]
                if tj >= 0:
                    acc[ti, tj] += window - d + 1
    return acc


def build_hal(corpus_path: str | Path, window: int = 10, min_count: int = 2,
              max_vocab: int = 50_000) -> CooccurrenceModel:
    if window < 1:
        raise ValueError("window must be >= 1")
    corpus_path = Path(corpus_path)
    freq: Counter = Counter()
    for tokens in _corpus_lines(corpus_path):
        freq.update(tokens)
    if not freq:
        raise ValueError(f"corpus {corpus_path} contains no tokens")
    kept = sorted((t for t, c in freq.items() if c >= min_count), key=lambda t: (-freq[t], t))
    kept = kept[:max_vocab]
    if not kept:
        raise ValueError(f"no token in {corpus_path} reaches min_count={min_count}")
    vocab = {t: i for i, t in enumerate(kept)}
    acc = hal_counts(_corpus_lines(corpus_path), vocab, window)
    V = len(vocab)
    if acc:
        keys = sorted(acc)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((acc[k] for k in keys), dtype=float, count=len(keys))
        counts = sp.csr_matrix((vals, (rows, cols)), shape=(V, V))
    else:
        counts = sp.csr_matrix((V, V))
    logger.info("HAL model: %d tokens, %d nonzero cells", V, counts.nnz)
    return CooccurrenceModel(vocab, counts, window, min_count, max_vocab)


def load_word_vectors(path: str | Path, source: str = "file") -> WordVectors:
    """Read the ``token v1 ... vd`` text format with an optional ``count dim`` header."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n\r").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if not values:
                raise VectorFileError(f"{path}:{lineno}: token {token!r} has no components")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise VectorFileError(f"{path}:{lineno}: expected {dim} components, got {len(values)}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise VectorFileError(f"{path}:{lineno}: non-numeric component") from None
            if not np.all(np.isfinite(vec)):
                raise VectorFileError(f"{path}:{lineno}: non-finite component")
            vectors[token] = vec
    if not vectors:
        raise VectorFileError(f"{path}: no vectors found")
    return WordVectors.from_mapping(vectors, source=source)


def vector_distance(metric: VectorMetric, u: np.ndarray, v: np.ndarray) -> float:
    diff = np.abs(u - v)
    if metric.name == "euclidean":
        return float(np.sqrt(np.dot(diff, diff)))
    if metric.name == "manhattan":
        return float(diff.sum())
    if metric.name == "minkowski":
        return float(np.sum(diff ** metric.p) ** (1.0 / metric.p))
    raise ValueError("cosine is not a distance here")


def vector_similarity(metric: VectorMetric | str, u, v) -> Score:
    if isinstance(metric, str):
        metric = VectorMetric(metric)
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if metric.name == "cosine":
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return Score(0.0, degenerate=True)
        cos = min(1.0, max(-1.0, float(np.dot(u, v) / (nu * nv))))
        if np.array_equal(u, v):
            cos = 1.0
        return Score((1.0 + cos) / 2.0)
    return Score(1.0 / (1.0 + vector_distance(metric, u, v)))


def _pairwise(metric: VectorMetric, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = vector_similarity(metric, A[i], B[j])
    return out


def sentence_similarity(vectors: WordVectors, metric: VectorMetric | str, agg: str,
                        a: Sequence[str], b: Sequence[str]) -> Score:
    """Sentence similarity from word vectors, by mean vector or best-match averaging."""
    if isinstance(metric, str):
        metric = VectorMetric(metric)
    if agg not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {agg!r}")
    A, B = vectors.rows(a), vectors.rows(b)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return Score(0.0, degenerate=True)
    if agg == "mean-vector":
        return vector_similarity(metric, A.mean(axis=0), B.mean(axis=0))
    sims = _pairwise(metric, A, B)
    value = 0.5 * (sims.max(axis=1).mean() + sims.max(axis=0).mean())
    return Score(min(1.0, float(value)))

