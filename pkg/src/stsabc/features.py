"""Feature registry and feature-matrix construction.

Every traditional algorithm becomes one :class:`FeatureSpec` with an ordered
list of parameter configurations. :func:`build_bank` evaluates every
configuration of every spec once (memoized on disk through
:class:`FeatureStore`); the optimizer then picks columns out of the bank
without recomputing similarities.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import sqlite3
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._types import is_degenerate
from .corpus import Dataset, Sentence, SentencePair, TokenMode, WORD, tokenize
from .knowsim import KNOW_AGGREGATIONS, Taxonomy, sentence_similarity_know
from .stringsim import CharMetric, char_similarity
from .termsim import TERM_METRICS, term_similarity
from .vecspace import (COSINE, EUCLIDEAN, MANHATTAN, MINKOWSKI3, WordVectors,
                       sentence_similarity, vector_similarity)

logger = logging.getLogger(__name__)

FAMILIES = ("char", "term", "vec", "know", "embed")
TERM_MODES = (WORD, TokenMode(2), TokenMode(3))
VECTOR_METRICS = (COSINE, EUCLIDEAN, MANHATTAN, MINKOWSKI3)

Scorer = Callable[[Sentence, Sentence, int, bool], float]


class FeatureError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    family: str
    configs: tuple[str, ...]
    scorer: Scorer = field(repr=False, compare=False)
    active_config: int = 0
    fingerprint: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        if not self.configs:
            raise ValueError(f"{self.id}: configs must be nonempty")
        if not 0 <= self.active_config < len(self.configs):
            raise ValueError(f"{self.id}: active_config out of range")

    def with_config(self, index: int) -> "FeatureSpec":
        return replace(self, active_config=index)

    def column_id(self, index: int | None = None) -> str:
        index = self.active_config if index is None else index
        if len(self.configs) == 1:
            return self.id
        return f"{self.id}-{self.configs[index]}"

    def score(self, a: Sentence, b: Sentence, config: int | None = None,
              lemmatized: bool = False) -> float:
        config = self.active_config if config is None else config
        return self.scorer(a, b, config, lemmatized)


@dataclass
class Resources:
    """Optional models that enable the vector, taxonomy and embedding families."""

    hal: WordVectors | None = None
    word_vectors: WordVectors | None = None
    taxonomy: Taxonomy | None = None
    embed_client: object | None = None
    fingerprints: dict = field(default_factory=dict)


def _char_spec(name: str, configs: Sequence[tuple[str, CharMetric]]) -> FeatureSpec:
    metrics = [m for _, m in configs]

    def scorer(a, b, cfg, lemmatized):
        return char_similarity(metrics[cfg], a.text(lemmatized), b.text(lemmatized))

    return FeatureSpec(name, "char", tuple(label for label, _ in configs), scorer)


def _alignment_configs(name):
    return [("m1-x-1-g-1", CharMetric(name, match=1, mismatch=-1, gap=-1)),
            ("m1-x0-g-1", CharMetric(name, match=1, mismatch=0, gap=-1)),
            ("m2-x-1-g-2", CharMetric(name, match=2, mismatch=-1, gap=-2))]


def char_specs() -> list[FeatureSpec]:
    plain = lambda name: _char_spec(name, [("default", CharMetric(name))])  # noqa: E731
    return [
        plain("hamming"),
        plain("levenshtein"),
        plain("damerau-levenshtein"),
        plain("jaro"),
        _char_spec("jaro-winkler", [(f"p{p:g}", CharMetric("jaro-winkler", prefix_weight=p))
                                    for p in (0.1, 0.2, 0.25)]),
        _char_spec("needleman-wunsch", _alignment_configs("needleman-wunsch")),
        _char_spec("smith-waterman", _alignment_configs("smith-waterman")),
        plain("lcsseq"),
        plain("lcsstr"),
    ]


def _term_tokens(s: Sentence, mode: TokenMode, lemmatized: bool):
    if mode.is_word:
        return s.words(lemmatized)
    return tokenize(s.text(lemmatized), mode)


def term_specs() -> list[FeatureSpec]:
    specs = []
    for name in TERM_METRICS:
        def scorer(a, b, cfg, lemmatized, name=name):
            mode = TERM_MODES[cfg]
            return term_similarity(name, _term_tokens(a, mode, lemmatized),
                                   _term_tokens(b, mode, lemmatized))
        specs.append(FeatureSpec(name, "term", tuple(m.label for m in TERM_MODES), scorer))
    return specs


def _vector_configs():
    return [(m, agg) for agg in ("mean-vector", "best-match") for m in VECTOR_METRICS]


def _vector_spec(spec_id: str, family: str, get_vectors, fingerprint="") -> FeatureSpec:
    configs = _vector_configs()

    def scorer(a, b, cfg, lemmatized):
        metric, agg = configs[cfg]
        ta, tb = a.words(lemmatized), b.words(lemmatized)
        return sentence_similarity(get_vectors(ta, tb), metric, agg, ta, tb)

    labels = tuple(f"{m.label}-{'mean' if agg == 'mean-vector' else 'best'}"
                   for m, agg in configs)
    return FeatureSpec(spec_id, family, labels, scorer, fingerprint=fingerprint)


def _know_spec(metric: str, taxonomy: Taxonomy, fingerprint="") -> FeatureSpec:
    def scorer(a, b, cfg, lemmatized):
        return sentence_similarity_know(metric, taxonomy, KNOW_AGGREGATIONS[cfg],
                                        a.words(lemmatized), b.words(lemmatized))

    return FeatureSpec(metric, "know", KNOW_AGGREGATIONS, scorer, fingerprint=fingerprint)


def _embed_sentence_spec(client, fingerprint="") -> FeatureSpec:
    def scorer(a, b, cfg, lemmatized):
        va, vb = client.embed([a.text(lemmatized), b.text(lemmatized)])
        return vector_similarity(VECTOR_METRICS[cfg], va, vb)

    return FeatureSpec("embed-sentence", "embed", tuple(m.label for m in VECTOR_METRICS),
                       scorer, fingerprint=fingerprint)


def default_registry(resources: Resources | None = None) -> list[FeatureSpec]:
    """One spec per in-scope algorithm; families without resources are left out."""
    res = resources or Resources()
    fp = res.fingerprints
    specs = char_specs() + term_specs()
    if res.hal is not None:
        specs.append(_vector_spec("hal", "vec", lambda ta, tb: res.hal, fp.get("hal", "")))
    if res.word_vectors is not None:
        specs.append(_vector_spec("word-vectors", "vec", lambda ta, tb: res.word_vectors,
                                  fp.get("word_vectors", "")))
    if res.taxonomy is not None:
        for metric in ("path", "wu-palmer", "leacock-chodorow"):
            specs.append(_know_spec(metric, res.taxonomy, fp.get("taxonomy", "")))
    if res.embed_client is not None:
        client = res.embed_client
        model = getattr(getattr(client, "config", None), "model_name", "")
        specs.append(_embed_sentence_spec(client, model))
        specs.append(_vector_spec("embed-words", "embed",
                                  lambda ta, tb: client.word_vectors([ta, tb]), model))
    return specs


def registry_names(specs: Sequence[FeatureSpec]) -> dict[str, tuple[FeatureSpec, int]]:
    """Command-line algorithm names: every spec id plus ``<id>-<config>`` variants."""
    names = {}
    for spec in specs:
        names[spec.id] = (spec, spec.active_config)
        if len(spec.configs) > 1:
            for i in range(len(spec.configs)):
                names[spec.column_id(i)] = (spec, i)
    return names


# ---------------------------------------------------------------------------
# memo store


def pair_key(pair: SentencePair, lemmatized: bool) -> str:
    h = hashlib.sha1()
    for part in (pair.id, pair.a.text(lemmatized), pair.b.text(lemmatized),
                 "L" if lemmatized else "-"):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class FeatureStore:
    """SQLite memo of similarity values keyed by (pair, spec, config index)."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._local = threading.local()
        with self._conn() as con:
            con.execute("CREATE TABLE IF NOT EXISTS cell (pair TEXT, spec TEXT, config INTEGER,"
                        " value REAL, degenerate INTEGER, PRIMARY KEY (pair, spec, config))")

    def _conn(self) -> sqlite3.Connection:
        con = getattr(self._local, "con", None)
        if con is None:
            con = sqlite3.connect(self.path, timeout=60)
            if self.path != ":memory:":
                con.execute("PRAGMA journal_mode=WAL")
            self._local.con = con
        return con

    @staticmethod
    def spec_key(spec: FeatureSpec) -> str:
        return f"{spec.id}@{spec.fingerprint}" if spec.fingerprint else spec.id

    def get_many(self, spec: FeatureSpec, config: int, keys: Sequence[str]) -> dict:
        con = self._conn()
        rows = con.execute("SELECT pair, value, degenerate FROM cell WHERE spec=? AND config=?",
                           (self.spec_key(spec), config)).fetchall()
        wanted = set(keys)
        return {p: (v, bool(d)) for p, v, d in rows if p in wanted}

    def put_many(self, spec: FeatureSpec, config: int, items) -> None:
        key = self.spec_key(spec)
        with self._conn() as con:
            con.executemany("INSERT OR REPLACE INTO cell VALUES (?, ?, ?, ?, ?)",
                            [(p, key, config, float(v), int(d)) for p, (v, d) in items])

    def __len__(self):
        return self._conn().execute("SELECT COUNT(*) FROM cell").fetchone()[0]


# ---------------------------------------------------------------------------
# matrices


@dataclass
class FeatureMatrix:
    specs: list[FeatureSpec]
    values: np.ndarray
    gold: np.ndarray
    degenerate: np.ndarray
    pair_ids: list[str]

    @property
    def column_ids(self) -> list[str]:
        return [s.column_id() for s in self.specs]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.column_ids + ["gold"])
            for row, g in zip(self.values, self.gold):
                w.writerow([repr(float(v)) for v in row] + [repr(float(g))])


@dataclass
class FeatureBank:
    """Every configuration column of every spec: ``blocks[j]`` is rows x configs."""

    specs: list[FeatureSpec]
    blocks: list[np.ndarray]
    degenerate: list[np.ndarray]
    gold: np.ndarray
    pair_ids: list[str]

    @property
    def n_rows(self) -> int:
        return self.gold.shape[0]

    @property
    def n_configs(self) -> list[int]:
        return [len(s.configs) for s in self.specs]

    def columns(self, selection: Sequence[tuple[int, int]]) -> np.ndarray:
        """Matrix of the chosen (spec index, config index) columns, in order."""
        if not selection:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([self.blocks[j][:, c] for j, c in selection])

    def matrix(self, active: Sequence[int] | None = None) -> FeatureMatrix:
        active = [s.active_config for s in self.specs] if active is None else list(active)
        sel = list(enumerate(active))
        return FeatureMatrix([s.with_config(c) for s, c in zip(self.specs, active)],
                             self.columns(sel), self.gold.copy(),
                             np.column_stack([self.degenerate[j][:, c] for j, c in sel])
                             if sel else np.zeros((self.n_rows, 0), dtype=bool),
                             list(self.pair_ids))

    def subset(self, rows) -> "FeatureBank":
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureBank(self.specs, [b[rows] for b in self.blocks],
                           [d[rows] for d in self.degenerate], self.gold[rows],
                           [self.pair_ids[i] for i in rows])

    @classmethod
    def from_matrix(cls, fm: FeatureMatrix) -> "FeatureBank":
        """Treat each column of a plain matrix as a single-configuration spec."""
        specs = [replace(s, configs=(s.configs[s.active_config],), active_config=0)
                 for s in fm.specs]
        return cls(specs, [fm.values[:, [j]] for j in range(fm.values.shape[1])],
                   [fm.degenerate[:, [j]] for j in range(fm.values.shape[1])],
                   np.asarray(fm.gold, dtype=float), list(fm.pair_ids))

    @classmethod
    def from_arrays(cls, X, y, names: Sequence[str] | None = None) -> "FeatureBank":
        X = np.asarray(X, dtype=float)
        names = names or [f"f{j}" for j in range(X.shape[1])]
        specs = [FeatureSpec(n, "char", ("default",), _no_scorer) for n in names]
        return cls(specs, [X[:, [j]] for j in range(X.shape[1])],
                   [np.zeros((X.shape[0], 1), dtype=bool) for _ in range(X.shape[1])],
                   np.asarray(y, dtype=float), [str(i) for i in range(X.shape[0])])


def _no_scorer(a, b, cfg, lemmatized):
    raise FeatureError("array-backed feature has no scorer")


def _compute_column(spec: FeatureSpec, config: int, pairs: Sequence[SentencePair],
                    lemmatized: bool, store: FeatureStore | None):
    keys = [pair_key(p, lemmatized) for p in pairs]
    cached = store.get_many(spec, config, keys) if store is not None else {}
    values = np.empty(len(pairs))
    flags = np.zeros(len(pairs), dtype=bool)
    fresh = []
    for i, (pair, key) in enumerate(zip(pairs, keys)):
        if key in cached:
            values[i], flags[i] = cached[key]
            continue
        try:
            v = spec.score(pair.a, pair.b, config, lemmatized)
        except Exception as exc:
            raise FeatureError(f"pair {pair.id!r}, spec {spec.column_id(config)!r}: {exc}") from exc
        if not np.isfinite(v):
            raise FeatureError(f"pair {pair.id!r}, spec {spec.column_id(config)!r}: non-finite value")
        values[i] = min(1.0, max(0.0, float(v)))
        flags[i] = is_degenerate(v)
        fresh.append((key, (values[i], flags[i])))
    if store is not None and fresh:
        store.put_many(spec, config, fresh)
    return values, flags


def _pairs(data) -> list[SentencePair]:
    return list(data.pairs if isinstance(data, Dataset) else data)


def build_bank(dataset, specs: Sequence[FeatureSpec], lemmatized: bool = False,
               store: FeatureStore | None = None) -> FeatureBank:
    pairs = _pairs(dataset)
    blocks, flags = [], []
    for spec in specs:
        cols = [_compute_column(spec, c, pairs, lemmatized, store)
                for c in range(len(spec.configs))]
        blocks.append(np.column_stack([v for v, _ in cols]) if pairs else
                      np.zeros((0, len(spec.configs))))
        flags.append(np.column_stack([d for _, d in cols]) if pairs else
                     np.zeros((0, len(spec.configs)), dtype=bool))
        logger.debug("computed %s (%d configs)", spec.id, len(spec.configs))
    gold = np.array([p.gold for p in pairs], dtype=float)
    return FeatureBank(list(specs), blocks, flags, gold, [p.id for p in pairs])


def build_matrix(dataset, specs: Sequence[FeatureSpec], lemmatized: bool = False,
                 store: FeatureStore | None = None) -> FeatureMatrix:
    """Pairs x specs matrix under each spec's active configuration."""
    if not specs:
        raise ValueError("specs must be nonempty")
    pairs = _pairs(dataset)
    cols = [_compute_column(s, s.active_config, pairs, lemmatized, store) for s in specs]
    n = len(pairs)
    values = np.column_stack([v for v, _ in cols]) if n else np.zeros((0, len(specs)))
    flags = np.column_stack([d for _, d in cols]) if n else np.zeros((0, len(specs)), bool)
    return FeatureMatrix(list(specs), values, np.array([p.gold for p in pairs], dtype=float),
                         flags, [p.id for p in pairs])


class SimilarityFeaturizer(TransformerMixin, BaseEstimator):
    """Turn sentence pairs into a similarity feature matrix.

    Parameters
    ----------
    specs : list of FeatureSpec, optional
        Columns to compute; defaults to ``default_registry(resources)``.
    resources : Resources, optional
    lemmatized : bool
        Score lemma sequences instead of surface tokens.
    store_path : str, optional
        SQLite file used to memoize cell values across calls.
    """

    def __init__(self, specs=None, resources=None, lemmatized=False, store_path=None):
        self.specs = specs
        self.resources = resources
        self.lemmatized = lemmatized
        self.store_path = store_path

    def fit(self, X, y=None):
        self.specs_ = list(self.specs) if self.specs is not None else default_registry(self.resources)
        if not self.specs_:
            raise ValueError("no feature specs")
        self.store_ = FeatureStore(self.store_path) if self.store_path else None
        self.n_features_out_ = len(self.specs_)
        return self

    def transform(self, X):
        check_is_fitted(self, "specs_")
        return build_matrix(X, self.specs_, self.lemmatized, self.store_).values

    def get_feature_names_out(self, input_features=None):
        return np.array([s.column_id() for s in self.specs_], dtype=object)
