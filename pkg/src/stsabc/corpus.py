"""Dataset loading, text normalization and tokenization."""

from __future__ import annotations

import csv
import logging
import re
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[^\W_]+")
_SPACE_RE = re.compile(r"\s+")

FORMATS = ("sts-benchmark-tsv", "generic-tsv")


class DatasetError(ValueError):
    """Raised for malformed dataset or lemma files."""


@dataclass(frozen=True)
class TokenMode:
    """Word tokens (``n == 0``) or contiguous character n-grams of length ``n``."""

    n: int = 0

    def __post_init__(self):
        if self.n not in (0, 1, 2, 3, 4):
            raise ValueError(f"character n-gram size must be in 1..4, got {self.n}")

    @property
    def is_word(self) -> bool:
        return self.n == 0

    @property
    def label(self) -> str:
        return "word" if self.is_word else f"char{self.n}"

    @classmethod
    def parse(cls, label: str) -> "TokenMode":
        if label == "word":
            return WORD
        m = re.fullmatch(r"char([1-4])", label)
        if not m:
            raise ValueError(f"unknown token mode {label!r}")
        return cls(int(m.group(1)))


WORD = TokenMode(0)


def char_ngrams(n: int) -> TokenMode:
    return TokenMode(n)


def normalize(text: str) -> str:
    """NFC, lowercase, whitespace runs collapsed to one space, ends stripped."""
    text = unicodedata.normalize("NFC", text).lower()
    return _SPACE_RE.sub(" ", text).strip()


def tokenize(text: str, mode: TokenMode = WORD) -> list[str]:
    norm = normalize(text)
    if mode.is_word:
        return _WORD_RE.findall(norm)
    n = mode.n
    return [norm[i:i + n] for i in range(len(norm) - n + 1)]


@dataclass(frozen=True)
class Sentence:
    raw: str
    tokens: tuple[str, ...]
    lemmas: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.lemmas is not None and len(self.lemmas) != len(self.tokens):
            raise ValueError("lemmas must align with tokens")

    @classmethod
    def from_text(cls, raw: str) -> "Sentence":
        return cls(raw, tuple(tokenize(raw, WORD)))

    def words(self, lemmatized: bool = False) -> tuple[str, ...]:
        if lemmatized and self.lemmas is not None:
            return self.lemmas
        return self.tokens

    def text(self, lemmatized: bool = False) -> str:
        """Normalized character stream; lemmatized text is the lemmas joined by spaces."""
        if lemmatized and self.lemmas is not None:
            return " ".join(self.lemmas)
        return normalize(self.raw)


@dataclass(frozen=True)
class SentencePair:
    id: str
    a: Sentence
    b: Sentence
    gold: float


@dataclass
class Dataset:
    name: str
    pairs: list[SentencePair] = field(default_factory=list)
    scale_max: float = 5.0

    def __post_init__(self):
        if self.scale_max <= 0:
            raise ValueError("scale_max must be positive")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def gold(self) -> list[float]:
        return [p.gold for p in self.pairs]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.name, [self.pairs[i] for i in indices], self.scale_max)


def apply_lemmas(s: Sentence, lemma_map: Mapping[str, str]) -> Sentence:
    return replace(s, lemmas=tuple(lemma_map.get(t, t) for t in s.tokens))


def lemmatize_dataset(ds: Dataset, lemma_map: Mapping[str, str]) -> Dataset:
    pairs = [replace(p, a=apply_lemmas(p.a, lemma_map), b=apply_lemmas(p.b, lemma_map))
             for p in ds.pairs]
    return Dataset(ds.name, pairs, ds.scale_max)


def load_lemma_map(path: str | Path) -> dict[str, str]:
    """Read ``surface<TAB>lemma`` lines; later duplicates override earlier ones."""
    lemma_map: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
            surface, lemma = (normalize(c) for c in cols)
            lemma_map[surface] = lemma
    return lemma_map


def _parse_score(value: str, lineno: int, path, scale_max: float) -> float:
    try:
        score = float(value)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: cannot parse score {value!r}") from None
    if not 0.0 <= score <= scale_max:
        raise DatasetError(f"{path}:{lineno}: score {score} outside [0, {scale_max}]")
    return score


def load_dataset(path: str | Path, format: str = "sts-benchmark-tsv",
                 name: str | None = None, scale_max: float = 5.0) -> Dataset:
    """Load a sentence-pair TSV.

    ``sts-benchmark-tsv`` lines are ``score<TAB>sentence1<TAB>sentence2`` with no
    header; pair ids are line numbers. ``generic-tsv`` starts with a header that
    names ``score``, ``sentence1`` and ``sentence2`` columns (any order) and may
    name an ``id`` column.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown dataset format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    ds = Dataset(name or path.stem, [], scale_max)
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        columns = {"score": 0, "sentence1": 1, "sentence2": 2}
        width = 3
        start = 1
        if format == "generic-tsv":
            header = next(reader, None)
            if header is None:
                return ds
            header = [h.strip().lower() for h in header]
            missing = {"score", "sentence1", "sentence2"} - set(header)
            if missing:
                raise DatasetError(f"{path}:1: header lacks columns {sorted(missing)}")
            columns = {h: i for i, h in enumerate(header)}
            width = len(header)
            start = 2
        for lineno, row in enumerate(reader, start):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            score = _parse_score(row[columns["score"]], lineno, path, scale_max)
            pid = row[columns["id"]] if "id" in columns else str(lineno)
            if pid in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate pair id {pid!r}")
            seen.add(pid)
            ds.pairs.append(SentencePair(pid, Sentence.from_text(row[columns["sentence1"]]),
                                         Sentence.from_text(row[columns["sentence2"]]), score))
    logger.info("loaded %d pairs from %s", len(ds), path)
    return ds


def write_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in ds.pairs:
            fh.write(f"{p.gold!r}\t{p.a.raw}\t{p.b.raw}\n")


def pairs_from_texts(texts_a: Sequence[str], texts_b: Sequence[str],
                     gold: Sequence[float] | None = None) -> list[SentencePair]:
    if len(texts_a) != len(texts_b):
        raise ValueError("texts_a and texts_b differ in length")
    gold = gold if gold is not None else [0.0] * len(texts_a)
    return [SentencePair(str(i), Sentence.from_text(a), Sentence.from_text(b), float(g))
            for i, (a, b, g) in enumerate(zip(texts_a, texts_b, gold))]
