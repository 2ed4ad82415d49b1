"""Path, Wu-Palmer and Leacock-Chodorow similarity over an is-a taxonomy.

Taxonomy files have two sections::

    [edges]
    dog<TAB>animal
    [words]
    pes<TAB>dog

Nodes without a parent hang under a virtual root when there is more than one
of them. Depth counts nodes, so the root has depth 1.
"""

from __future__ import annotations

import math
from collections import deque
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._types import Score
from .corpus import normalize

KNOW_METRICS = ("path", "wu-palmer", "leacock-chodorow")
KNOW_AGGREGATIONS = ("best-match", "max-pair")
VIRTUAL_ROOT = "<root>"


class TaxonomyError(ValueError):
    pass


class Taxonomy:
    def __init__(self, edges: Iterable[tuple[str, str]],
                 word_map: Mapping[str, Iterable[str]] | None = None):
        parents: dict[str, set[str]] = {}
        for child, parent in edges:
            if child == parent:
                raise TaxonomyError(f"self loop on {child!r}")
            parents.setdefault(child, set()).add(parent)
            parents.setdefault(parent, set())
        roots = sorted(n for n, ps in parents.items() if not ps)
        if not parents:
            raise TaxonomyError("taxonomy has no nodes")
        if not roots:
            raise TaxonomyError("taxonomy has a cycle (no parentless node)")
        if len(roots) == 1:
            self.root = roots[0]
        else:
            self.root = VIRTUAL_ROOT
            parents[VIRTUAL_ROOT] = set()
            for r in roots:
                parents[r].add(VIRTUAL_ROOT)
        self.parents = {n: tuple(sorted(ps)) for n, ps in parents.items()}
        children: dict[str, list[str]] = {n: [] for n in self.parents}
        for n, ps in self.parents.items():
            for p in ps:
                children[p].append(n)
        self.children = {n: tuple(sorted(cs)) for n, cs in children.items()}
        self._check_acyclic()
        self.depth = self._depths()
        if len(self.depth) != len(self.parents):
            raise TaxonomyError("some nodes do not reach the root")
        self.max_depth = max(self.depth.values())
        self.word_map: dict[str, tuple[str, ...]] = {}
        for word, synsets in (word_map or {}).items():
            synsets = tuple(sorted(set(synsets)))
            if not synsets:
                raise TaxonomyError(f"word {word!r} maps to no synset")
            unknown = [s for s in synsets if s not in self.parents]
            if unknown:
                raise TaxonomyError(f"word {word!r} maps to unknown synsets {unknown}")
            self.word_map[word] = synsets
        self._ancestors = lru_cache(maxsize=None)(self._ancestors_uncached)
        self.path_length = lru_cache(maxsize=65536)(self._path_length)

    def __contains__(self, node) -> bool:
        return node in self.parents

    def __len__(self):
        return len(self.parents)

    def _check_acyclic(self):
        indeg = {n: len(ps) for n, ps in self.parents.items()}
        queue = deque(n for n, d in indeg.items() if d == 0)
        seen = 0
        while queue:
            n = queue.popleft()
            seen += 1
            for c in self.children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if seen != len(self.parents):
            raise TaxonomyError("taxonomy contains a cycle")

    def _depths(self) -> dict[str, int]:
        depth = {self.root: 1}
        queue = deque([self.root])
        while queue:
            n = queue.popleft()
            for c in self.children[n]:
                if c not in depth:
                    depth[c] = depth[n] + 1
                    queue.append(c)
        return depth

    def _ancestors_uncached(self, node: str) -> frozenset:
        out = {node}
        stack = [node]
        while stack:
            for p in self.parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return frozenset(out)

    def ancestors(self, node: str) -> frozenset:
        """The node itself and everything above it."""
        self._require(node)
        return self._ancestors(node)

    def lowest_common_subsumer(self, s1: str, s2: str) -> str:
        common = self.ancestors(s1) & self.ancestors(s2)
        return max(common, key=lambda n: (self.depth[n], n))

    def _path_length(self, s1: str, s2: str) -> int:
        if s1 == s2:
            return 0
        # undirected BFS over is-a edges
        dist = {s1: 0}
        queue = deque([s1])
        while queue:
            n = queue.popleft()
            for m in self.parents[n] + self.children[n]:
                if m not in dist:
                    if m == s2:
                        return dist[n] + 1
                    dist[m] = dist[n] + 1
                    queue.append(m)
        raise TaxonomyError(f"{s1!r} and {s2!r} are disconnected")

    def _require(self, node: str):
        if node not in self.parents:
            raise KeyError(f"synset {node!r} not in taxonomy")

    @classmethod
    def load(cls, path: str | Path) -> "Taxonomy":
        edges: list[tuple[str, str]] = []
        words: dict[str, set[str]] = {}
        section = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n\r")
                if not line.strip() or line.startswith("#"):
                    continue
                if line.strip() in ("[edges]", "[words]"):
                    section = line.strip()
                    continue
                cols = line.split("\t")
                if section is None or len(cols) != 2:
                    raise TaxonomyError(f"{path}:{lineno}: expected a section header or 2 columns")
                if section == "[edges]":
                    edges.append((cols[0], cols[1]))
                else:
                    words.setdefault(normalize(cols[0]), set()).add(cols[1])
        return cls(edges, words)


def synset_similarity(metric: str, t: Taxonomy, s1: str, s2: str) -> float:
    t._require(s1)
    t._require(s2)
    if metric == "path":
        return 1.0 / (1.0 + t.path_length(s1, s2))
    if metric == "wu-palmer":
        lcs = t.lowest_common_subsumer(s1, s2)
        return 2.0 * t.depth[lcs] / (t.depth[s1] + t.depth[s2])
    if metric == "leacock-chodorow":
        scale = 2.0 * t.max_depth
        if scale <= 1.0:
            return 1.0
        nodes = t.path_length(s1, s2) + 1
        return min(1.0, max(0.0, -math.log(nodes / scale) / math.log(scale)))
    raise ValueError(f"unknown knowledge metric {metric!r}")


def word_similarity(metric: str, t: Taxonomy, w1: str, w2: str) -> float | None:
    """Best synset-pair similarity; ``None`` when a word is unmapped (unless equal)."""
    if w1 == w2:
        return 1.0
    s1, s2 = t.word_map.get(w1), t.word_map.get(w2)
    if not s1 or not s2:
        return None
    return max(synset_similarity(metric, t, a, b) for a in s1 for b in s2)


def sentence_similarity_know(metric: str, t: Taxonomy, agg: str,
                             a: Sequence[str], b: Sequence[str]) -> Score:
    if agg not in KNOW_AGGREGATIONS:
        raise ValueError(f"unknown aggregation {agg!r}")
    table = [[word_similarity(metric, t, x, y) for y in b] for x in a]
    defined = [v for row in table for v in row if v is not None]
    if not defined:
        return Score(0.0, degenerate=True)
    if agg == "max-pair":
        return Score(max(defined))
    row_best = [max(v for v in row if v is not None)
                for row in table if any(v is not None for v in row)]
    col_best = [max(v for v in col if v is not None)
                for col in zip(*table) if any(v is not None for v in col)]
    return Score(0.5 * (sum(row_best) / len(row_best) + sum(col_best) / len(col_best)))
