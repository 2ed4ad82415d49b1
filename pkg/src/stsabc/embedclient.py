"""Client for an HTTP embedding service with a disk cache and a fixture mode.

Requests are ``{"model": ..., "input": [...]}``; responses carry
``{"data": [{"index": i, "embedding": [...]}, ...]}`` and are reordered by
index. Cache entries are one file per (model, text) key: a little-endian
uint32 dimension followed by float64 values.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .corpus import WORD, tokenize
from .vecspace import WordVectors

logger = logging.getLogger(__name__)


class EmbeddingError(RuntimeError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class EmbedConfig:
    base_url: str = "https://api.openai.com/v1/embeddings"
    model_name: str = "text-embedding-3-large"
    api_key_env: str = "OPENAI_API_KEY"
    mode: str = "live"
    cache_dir: str | None = None
    fixture_path: str | None = None
    timeout: float = 30.0
    max_batch: int = 256
    max_retries: int = 3
    max_parallel: int = 1

    def __post_init__(self):
        if self.mode not in ("live", "fixture"):
            raise ValueError(f"unknown embedding mode {self.mode!r}")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.mode == "fixture" and not self.fixture_path:
            raise ValueError("fixture mode requires fixture_path")


def cache_key(model_name: str, text: str) -> str:
    return hashlib.sha256(f"{model_name}\x00{text}".encode("utf-8")).hexdigest()


def encode_vector(vec) -> bytes:
    vec = np.ascontiguousarray(vec, dtype="<f8")
    return struct.pack("<I", vec.shape[0]) + vec.tobytes()


def decode_vector(blob: bytes) -> np.ndarray:
    (dim,) = struct.unpack_from("<I", blob)
    if len(blob) != 4 + 8 * dim:
        raise ValueError("truncated cache entry")
    return np.frombuffer(blob, dtype="<f8", offset=4, count=dim).astype(float)


class EmbeddingClient:
    """Embeds texts through the cache, then the fixture or the live service.

    ``stats`` counts cache hits, cache misses and HTTP requests sent.
    """

    def __init__(self, config: EmbedConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.stats = {"hits": 0, "misses": 0, "requests": 0}
        self._lock = threading.Lock()
        self._fixture = None
        if config.mode == "fixture":
            with open(config.fixture_path, encoding="utf-8") as fh:
                self._fixture = {k: np.asarray(v, dtype=float) for k, v in json.load(fh).items()}
        self._cache_dir = Path(config.cache_dir) if config.cache_dir else None
        if self._cache_dir is not None:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    def _bump(self, key, n=1):
        with self._lock:
            self.stats[key] += n

    def _cache_path(self, text: str) -> Path:
        return self._cache_dir / cache_key(self.config.model_name, text)

    def _cache_get(self, text: str):
        if self._cache_dir is None:
            return None
        path = self._cache_path(text)
        try:
            return decode_vector(path.read_bytes())
        except FileNotFoundError:
            return None
        except ValueError:
            logger.warning("discarding corrupt cache entry %s", path.name)
            return None

    def _cache_put(self, text: str, vec: np.ndarray) -> None:
        if self._cache_dir is None:
            return
        fd, tmp = tempfile.mkstemp(dir=self._cache_dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode_vector(vec))
            os.replace(tmp, self._cache_path(text))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _post(self, batch: list[str]) -> list[np.ndarray]:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise EmbeddingError(f"environment variable {self.config.api_key_env} is not set")
        payload = {"model": self.config.model_name, "input": batch}
        headers = {"Authorization": f"Bearer {key}"}
        last = None
        for attempt in range(self.config.max_retries):
            self._bump("requests")
            try:
                resp = self.session.post(self.config.base_url, json=payload, headers=headers,
                                         timeout=self.config.timeout)
            except requests.RequestException as exc:
                last = EmbeddingError(f"transport failure: {exc}")
            else:
                if resp.status_code == 200:
                    return self._parse(resp.json(), len(batch))
                last = EmbeddingError(f"embedding service returned HTTP {resp.status_code}",
                                      status=resp.status_code)
                if resp.status_code < 500 and resp.status_code != 429:
                    raise last
            if attempt + 1 < self.config.max_retries:
                time.sleep(min(2.0 ** attempt * 0.5, 8.0))
        raise last

    @staticmethod
    def _parse(body, expected: int) -> list[np.ndarray]:
        try:
            items = sorted(body["data"], key=lambda d: d["index"])
            vecs = [np.asarray(d["embedding"], dtype=float) for d in items]
        except (KeyError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from None
        if len(vecs) != expected:
            raise EmbeddingError(f"expected {expected} embeddings, got {len(vecs)}")
        if len({v.shape for v in vecs}) > 1:
            raise EmbeddingError("embedding response has inconsistent dimensions")
        return vecs

    def _fetch(self, texts: list[str]) -> list[np.ndarray]:
        if self._fixture is not None:
            out = []
            for t in texts:
                if t not in self._fixture:
                    raise EmbeddingError(f"fixture has no embedding for {t!r}")
                out.append(self._fixture[t])
            return out
        size = self.config.max_batch
        batches = [texts[i:i + size] for i in range(0, len(texts), size)]
        if self.config.max_parallel > 1 and len(batches) > 1:
            with ThreadPoolExecutor(self.config.max_parallel) as pool:
                results = list(pool.map(self._post, batches))
        else:
            results = [self._post(b) for b in batches]
        return [v for r in results for v in r]

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be nonempty")
        found: dict[str, np.ndarray] = {}
        missing: list[str] = []
        seen: set[str] = set()
        for t in texts:
            if t in seen:
                continue
            seen.add(t)
            vec = self._cache_get(t)
            if vec is None:
                missing.append(t)
            else:
                found[t] = vec
        self._bump("hits", len(found))
        self._bump("misses", len(missing))
        if missing:
            for t, vec in zip(missing, self._fetch(missing)):
                self._cache_put(t, vec)
                found[t] = vec
        out = [found[t] for t in texts]
        if len({v.shape for v in out}) > 1:
            raise EmbeddingError("embeddings have inconsistent dimensions")
        return out

    def word_vectors(self, token_lists: Sequence[Sequence[str]]) -> WordVectors:
        """Embed each distinct token as its own input text."""
        vocab = sorted({t for tokens in token_lists for t in tokens})
        vecs = self.embed(vocab)
        return WordVectors({t: i for i, t in enumerate(vocab)}, np.vstack(vecs),
                           source="embedding-service")


def sentence_texts(raw_texts: Sequence[str]) -> list[str]:
    """Normalized sentence texts as sent to the service."""
    return [" ".join(tokenize(t, WORD)) for t in raw_texts]
