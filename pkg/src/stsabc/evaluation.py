"""Pearson correlation, stratified splitting, holdout scoring and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .models import make_model

FAMILY_TITLES = {
    "char": "Character-based STS algorithms",
    "term": "Term-based STS algorithms",
    "vec": "Statistical STS algorithms",
    "know": "Knowledge-based STS algorithms",
    "embed": "Embedding-service STS",
    "ml": "Custom ML models",
}
FAMILY_ORDER = tuple(FAMILY_TITLES)
DEFAULT_BINS = 5


class UndefinedCorrelation(float):
    """NaN marker returned when one side has zero variance."""

    def __new__(cls):
        return super().__new__(cls, math.nan)

    def __repr__(self):
        return "UndefinedCorrelation()"


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; ``UndefinedCorrelation`` (a NaN) for zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("pearson needs at least 2 paired values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return UndefinedCorrelation()
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def is_undefined(r: float) -> bool:
    return isinstance(r, float) and math.isnan(r)


def strata(gold: Sequence[float], bins: int = DEFAULT_BINS) -> np.ndarray:
    """Quantile-bin labels 0..k-1; a single stratum when there are fewer rows than bins."""
    gold = np.asarray(gold, dtype=float)
    n = gold.shape[0]
    if n < bins or bins <= 1 or n == 0:
        return np.zeros(n, dtype=np.int64)
    edges = np.quantile(gold, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    labels = np.searchsorted(edges, gold, side="right")
    _, compact = np.unique(labels, return_inverse=True)
    return compact.astype(np.int64)


def stratified_split(gold: Sequence[float], train_fraction: float = 0.8,
                     bins: int = DEFAULT_BINS, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    labels = strata(gold, bins)
    rng = np.random.default_rng(seed)
    train, hold = [], []
    for s in range(labels.max() + 1 if labels.size else 0):
        rows = np.flatnonzero(labels == s)
        rows = rows[rng.permutation(rows.shape[0])]
        k = math.floor(train_fraction * rows.shape[0] + 0.5)
        train.extend(rows[:k])
        hold.extend(rows[k:])
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(hold, dtype=np.int64))


@dataclass(frozen=True)
class CvPlan:
    k: int
    bins: int
    seed: int
    folds: np.ndarray = field(repr=False)

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds == fold
        return np.flatnonzero(~test), np.flatnonzero(test)

    def __iter__(self):
        return (self.split(f) for f in range(self.k))

    def __eq__(self, other):
        return (isinstance(other, CvPlan) and (self.k, self.bins, self.seed) ==
                (other.k, other.bins, other.seed) and np.array_equal(self.folds, other.folds))


def stratified_kfold(gold: Sequence[float], k: int = 10, bins: int = DEFAULT_BINS,
                     seed: int = 0) -> CvPlan:
    """Seeded shuffle within each stratum, then round-robin fold assignment.

    The round-robin counter carries over between strata so overall fold sizes
    differ by at most one.
    """
    labels = strata(gold, bins)
    n = labels.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    nxt = 0
    for s in range(labels.max() + 1):
        rows = np.flatnonzero(labels == s)
        rows = rows[rng.permutation(rows.shape[0])]
        folds[rows] = (nxt + np.arange(rows.shape[0])) % k
        nxt = (nxt + rows.shape[0]) % k
    return CvPlan(k, bins, seed, folds)


@dataclass
class ReportEntry:
    name: str
    family: str
    pearson: float
    selected: list[str] = field(default_factory=list)
    hyperparams: dict = field(default_factory=dict)
    runtime: float | None = None
    dataset: str = ""
    model: object = field(default=None, repr=False, compare=False)
    predictions: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.family,
                "pearson": None if is_undefined(self.pearson) else self.pearson,
                "selected": list(self.selected), "hyperparams": dict(self.hyperparams),
                "runtime": self.runtime, "dataset": self.dataset}

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEntry":
        r = d.get("pearson")
        return cls(d["name"], d["family"], UndefinedCorrelation() if r is None else float(r),
                   list(d.get("selected", [])), dict(d.get("hyperparams", {})),
                   d.get("runtime"), d.get("dataset", ""))


def finalize(kind: str, selected: Sequence[int], hyperparams: dict, X_train, y_train,
             X_holdout, y_holdout, seed: int = 0, feature_ids: Sequence[str] | None = None,
             name: str | None = None) -> ReportEntry:
    """Retrain on every training row with the chosen columns and score the holdout."""
    X_holdout = np.asarray(X_holdout, dtype=float)
    if X_holdout.shape[0] == 0:
        raise ValueError("holdout set is empty")
    cols = list(selected)
    if not cols:
        raise ValueError("no features selected")
    ids = [feature_ids[c] for c in cols] if feature_ids is not None else None
    model = make_model(kind, hyperparams, seed)
    model.fit(np.asarray(X_train, dtype=float)[:, cols], y_train, feature_ids=ids)
    pred = model.predict(X_holdout[:, cols])
    return ReportEntry(name or kind, "ml", pearson(pred, y_holdout),
                       ids if ids is not None else [str(c) for c in cols], dict(hyperparams),
                       model=model, predictions=pred)


def compare_correlations(pred_a, pred_b, gold, n_resamples: int = 1000,
                         seed: int = 0) -> tuple[float, float]:
    """Paired bootstrap test for the difference of two correlations with ``gold``.

    Returns ``(r_a - r_b, p)`` with the two-sided percentile p-value
    ``2 * min(P(delta* <= 0), P(delta* >= 0))`` capped at 1.
    """
    a, b, g = (np.asarray(v, dtype=float) for v in (pred_a, pred_b, gold))
    if not a.shape == b.shape == g.shape:
        raise ValueError("pred_a, pred_b and gold must have equal lengths")
    if a.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")

    def r(x, y):
        v = pearson(x, y)
        return 0.0 if is_undefined(v) else v

    delta = r(a, g) - r(b, g)
    rng = np.random.default_rng(seed)
    n = g.shape[0]
    le = ge = 0
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        d = r(a[idx], g[idx]) - r(b[idx], g[idx])
        le += d <= 0
        ge += d >= 0
    p = min(1.0, 2.0 * min(le, ge) / n_resamples)
    return delta, p


def _best_per_family(entries: Iterable[ReportEntry]) -> dict[str, float]:
    best: dict[str, float] = {}
    for e in entries:
        if is_undefined(e.pearson):
            continue
        if e.pearson > best.get(e.family, -math.inf):
            best[e.family] = e.pearson
    return best


def render_report(entries: Sequence[ReportEntry], format: str = "markdown") -> str:
    """Family-grouped score table; the best score in each family is marked."""
    if format not in ("markdown", "csv"):
        raise ValueError(f"unknown report format {format!r}")
    best = _best_per_family(entries)
    families = sorted({e.family for e in entries},
                      key=lambda f: (FAMILY_ORDER.index(f) if f in FAMILY_ORDER else 99, f))
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "method", "dataset", "pearson", "best", "selected",
                    "hyperparams", "runtime"])
        for fam in families:
            for e in entries:
                if e.family != fam:
                    continue
                w.writerow([fam, e.name, e.dataset,
                            "" if is_undefined(e.pearson) else repr(e.pearson),
                            int(not is_undefined(e.pearson) and e.pearson == best.get(fam)),
                            ";".join(e.selected), json.dumps(e.hyperparams, sort_keys=True),
                            "" if e.runtime is None else repr(e.runtime)])
        return buf.getvalue()

    lines = ["| Method | Dataset | Pearson |", "|---|---|---|"]
    for fam in families:
        lines.append(f"| **{FAMILY_TITLES.get(fam, fam)}** | | |")
        for e in entries:
            if e.family != fam:
                continue
            if is_undefined(e.pearson):
                score = "n/a"
            elif e.pearson == best.get(fam):
                score = f"**{e.pearson:.3f}**"
            else:
                score = f"{e.pearson:.3f}"
            lines.append(f"| {e.name} | {e.dataset} | {score} |")
    if not entries:
        lines.append("| | | |")
    return "\n".join(lines) + "\n"


def load_report_csv(text: str) -> list[ReportEntry]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(ReportEntry(
            row["method"], row["family"],
            UndefinedCorrelation() if row["pearson"] == "" else float(row["pearson"]),
            [s for s in row["selected"].split(";") if s], json.loads(row["hyperparams"]),
            None if row["runtime"] == "" else float(row["runtime"]), row["dataset"]))
    return out
