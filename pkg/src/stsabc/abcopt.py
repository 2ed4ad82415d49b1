"""Artificial bee colony search over feature subsets and model hyperparameters.

A candidate is a point in the unit hypercube. The first ``F`` coordinates
switch features on (``x >= 0.5``) and, above the threshold, pick one of the
feature's parameter configurations; the remaining coordinates encode model
hyperparameters. Fitness is the mean per-fold Pearson correlation of a
stratified k-fold cross-validation.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .evaluation import CvPlan, is_undefined, pearson, stratified_kfold
from .features import FeatureBank
from .models import make_model

logger = logging.getLogger(__name__)

INVALID_FITNESS = -1.0
SELECT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Hyperparam:
    name: str
    kind: str  # "continuous" | "integer" | "categorical"
    lo: float = 0.0
    hi: float = 1.0
    scale: str = "linear"
    choices: tuple = ()

    def __post_init__(self):
        if self.kind in ("continuous", "integer") and not self.lo < self.hi:
            raise ValueError(f"{self.name}: need lo < hi")
        if self.kind == "continuous" and self.scale == "log" and self.lo <= 0:
            raise ValueError(f"{self.name}: log scale needs lo > 0")
        if self.kind == "categorical" and len(self.choices) < 1:
            raise ValueError(f"{self.name}: categorical needs at least one choice")
        if self.kind not in ("continuous", "integer", "categorical"):
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")

    def decode(self, x: float):
        if self.kind == "categorical":
            k = len(self.choices)
            return self.choices[min(k - 1, math.floor(x * k))]
        if self.kind == "integer":
            return int(math.floor(self.lo + x * (self.hi - self.lo) + 0.5))
        if self.scale == "log":
            lo, hi = math.log(self.lo), math.log(self.hi)
            return float(math.exp(lo + x * (hi - lo)))
        return float(self.lo + x * (self.hi - self.lo))


MAX_DEPTH = Hyperparam("max_depth", "integer", 2, 16)
MIN_LEAF = Hyperparam("min_leaf", "integer", 1, 32)

DEFAULT_HYPERPARAMS: dict[str, tuple[Hyperparam, ...]] = {
    "linear": (),
    "ridge": (Hyperparam("alpha", "continuous", 1e-4, 1e2, "log"),),
    "tree": (MAX_DEPTH, MIN_LEAF),
    "forest": (Hyperparam("n_trees", "integer", 10, 300), MAX_DEPTH, MIN_LEAF,
               Hyperparam("feature_fraction", "continuous", 0.1, 1.0)),
    "boosting": (Hyperparam("n_estimators", "integer", 10, 500),
                 Hyperparam("learning_rate", "continuous", 0.01, 0.5, "log"),
                 Hyperparam("max_depth", "integer", 1, 6), MIN_LEAF),
}


@dataclass(frozen=True)
class SearchSpace:
    """``n_configs[i]`` is the number of parameter configurations of feature i."""

    n_configs: tuple[int, ...]
    hyperparams: tuple[Hyperparam, ...] = ()

    def __post_init__(self):
        if len(self.n_configs) < 1:
            raise ValueError("search space needs at least one feature")
        if any(c < 1 for c in self.n_configs):
            raise ValueError("every feature needs at least one configuration")

    @classmethod
    def for_model(cls, kind: str, n_configs: Sequence[int]) -> "SearchSpace":
        return cls(tuple(int(c) for c in n_configs), DEFAULT_HYPERPARAMS[kind])

    @property
    def n_features(self) -> int:
        return len(self.n_configs)

    @property
    def dim(self) -> int:
        return self.n_features + len(self.hyperparams)


@dataclass(frozen=True)
class Decoded:
    selected: tuple[tuple[int, int], ...]
    hyperparams: dict = field(hash=False)

    @property
    def key(self):
        return self.selected, tuple(sorted(self.hyperparams.items()))

    @property
    def features(self) -> list[int]:
        return [i for i, _ in self.selected]


def decode(position: Sequence[float], space: SearchSpace) -> Decoded:
    position = np.asarray(position, dtype=float)
    if position.shape != (space.dim,):
        raise ValueError(f"position has length {position.shape[0] if position.ndim else 0}, "
                         f"search space needs {space.dim}")
    selected = []
    for i, c in enumerate(space.n_configs):
        x = float(position[i])
        if x >= SELECT_THRESHOLD:
            cfg = min(c - 1, math.floor((x - SELECT_THRESHOLD) / (1 - SELECT_THRESHOLD) * c))
            selected.append((i, cfg))
    hp = {h.name: h.decode(float(x))
          for h, x in zip(space.hyperparams, position[space.n_features:])}
    return Decoded(tuple(selected), hp)


def cv_fitness(X: np.ndarray, y: np.ndarray, kind: str, hyperparams: dict, cv: CvPlan,
               seed: int = 0) -> float:
    """Mean per-fold Pearson; a fold with an undefined correlation contributes 0."""
    scores = []
    for train, test in cv:
        model = make_model(kind, hyperparams, seed).fit(X[train], y[train])
        r = pearson(model.predict(X[test]), y[test])
        scores.append(0.0 if is_undefined(r) else r)
    return float(np.mean(scores))


def fitness(position, space: SearchSpace, bank: FeatureBank, kind: str, cv: CvPlan,
            seed: int = 0) -> float:
    sol = decode(position, space)
    if not sol.selected:
        return INVALID_FITNESS
    return cv_fitness(bank.columns(sol.selected), bank.gold, kind, sol.hyperparams, cv, seed)


@dataclass(frozen=True)
class AbcConfig:
    n_sources: int = 50
    iterations: int = 30
    limit: int = 20
    seed: int = 0
    onlookers: int | None = None

    def __post_init__(self):
        for name in ("n_sources", "iterations", "limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.onlookers is not None and self.onlookers < 1:
            raise ValueError("onlookers must be >= 1")

    @property
    def n_onlookers(self) -> int:
        return self.n_sources if self.onlookers is None else self.onlookers


@dataclass
class AbcResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[float]
    evaluations: int
    scouts: int
    positions: np.ndarray = field(repr=False)
    trials: np.ndarray = field(repr=False)

    def expected_evaluations(self, cfg: AbcConfig) -> int:
        return cfg.n_sources + cfg.iterations * (cfg.n_sources + cfg.n_onlookers) + self.scouts


def bee_colony(objective: Callable[[np.ndarray], float], dim: int, cfg: AbcConfig,
               callback: Callable[[int, float], None] | None = None) -> AbcResult:
    """Maximize ``objective`` over ``[0, 1]**dim``.

    Employed and onlooker bees perturb one coordinate of a source toward or
    away from a random other source and keep the move only if fitness
    strictly improves; sources that fail more than ``cfg.limit`` times in a
    row are re-seeded by scouts. Onlookers pick sources with probability
    proportional to ``max(fitness + 1, 0)``.
    """
    rng = np.random.default_rng(cfg.seed)
    S = cfg.n_sources
    X = rng.random((S, dim))
    fit = np.empty(S)
    trials = np.zeros(S, dtype=np.int64)
    state = {"evals": 0, "best": -math.inf, "best_x": None}

    def evaluate(x):
        f = float(objective(x))
        state["evals"] += 1
        if f > state["best"]:
            state["best"] = f
            state["best_x"] = x.copy()
        return f

    for i in range(S):
        fit[i] = evaluate(X[i])

    def visit(i):
        j = rng.integers(dim)
        if S > 1:
            k = rng.integers(S - 1)
            k += k >= i
        else:
            k = i
        phi = rng.uniform(-1.0, 1.0)
        v = X[i].copy()
        v[j] = min(1.0, max(0.0, X[i, j] + phi * (X[i, j] - X[k, j])))
        f = evaluate(v)
        if f > fit[i]:
            X[i], fit[i], trials[i] = v, f, 0
        else:
            trials[i] += 1

    history = []
    scouts = 0
    for it in range(cfg.iterations):
        for i in range(S):
            visit(i)
        # objectives below -1 (never produced by cv_fitness) get zero weight
        weights = np.maximum(fit + 1.0, 0.0)
        total = weights.sum()
        probs = weights / total if total > 0 else np.full(S, 1.0 / S)
        for _ in range(cfg.n_onlookers):
            visit(int(rng.choice(S, p=probs)))
        for i in range(S):
            if trials[i] > cfg.limit:
                X[i] = rng.random(dim)
                fit[i] = evaluate(X[i])
                trials[i] = 0
                scouts += 1
        history.append(state["best"])
        if callback is not None:
            callback(it, state["best"])
    return AbcResult(state["best_x"], state["best"], history, state["evals"], scouts, X, trials)


@dataclass
class OptimizeResult:
    abc: AbcResult
    decoded: Decoded
    config: AbcConfig
    kind: str
    wall_time: float

    @property
    def best_fitness(self) -> float:
        return self.abc.best_fitness

    @property
    def history(self) -> list[float]:
        return self.abc.history

    def to_artifact(self, bank: FeatureBank | None = None) -> dict:
        """Deterministic run summary (wall time is kept out of it)."""
        sel = [{"feature": i, "config": c} for i, c in self.decoded.selected]
        if bank is not None:
            for item in sel:
                spec = bank.specs[item["feature"]]
                item["id"] = spec.column_id(item["config"])
        return {
            "config": asdict(self.config),
            "model": self.kind,
            "history": self.abc.history,
            "best_fitness": self.abc.best_fitness,
            "best_position": self.abc.best_position.tolist(),
            "selected": sel,
            "hyperparams": self.decoded.hyperparams,
            "evaluations": self.abc.evaluations,
            "scouts": self.abc.scouts,
        }


def optimize(cfg: AbcConfig, space: SearchSpace, bank: FeatureBank, kind: str,
             cv: CvPlan | None = None, model_seed: int | None = None) -> OptimizeResult:
    """Joint feature selection and hyperparameter search on the training bank."""
    if bank.n_rows == 0:
        raise ValueError("feature bank has no rows")
    if list(space.n_configs) != bank.n_configs:
        raise ValueError("search space does not match the feature bank")
    cv = cv if cv is not None else stratified_kfold(bank.gold, 10, seed=cfg.seed)
    model_seed = cfg.seed if model_seed is None else model_seed
    memo: dict = {}

    def objective(x):
        sol = decode(x, space)
        if not sol.selected:
            return INVALID_FITNESS
        key = sol.key
        if key not in memo:
            memo[key] = cv_fitness(bank.columns(sol.selected), bank.gold, kind,
                                   sol.hyperparams, cv, model_seed)
        return memo[key]

    def log(it, best):
        logger.info("iteration %d: best fitness %.4f", it + 1, best)

    start = time.perf_counter()
    res = bee_colony(objective, space.dim, cfg, callback=log)
    wall = time.perf_counter() - start
    logger.info("%d evaluations, %d distinct solutions", res.evaluations, len(memo))
    return OptimizeResult(res, decode(res.best_position, space), cfg, kind, wall)


def dumps_artifact(artifact: dict) -> str:
    return json.dumps(artifact, indent=2, sort_keys=True) + "\n"


class BeeColonyRegressor(RegressorMixin, BaseEstimator):
    """Meta-estimator: bee-colony feature/hyperparameter search, then a refit.

    ``fit`` accepts a plain feature array or a :class:`FeatureBank` (whose
    specs may carry several configurations each); ``predict`` must receive
    the same kind of input.

    Parameters
    ----------
    model : str
        One of ``linear``, ``ridge``, ``tree``, ``forest``, ``boosting``.
    n_sources, iterations, limit, onlookers
        Colony settings; ``onlookers=None`` means one per source.
    cv : int
        Number of stratified folds in the fitness function.
    bins : int
        Quantile strata used for stratification.
    random_state : int
    """

    def __init__(self, model="boosting", n_sources=50, iterations=30, limit=20,
                 onlookers=None, cv=10, bins=5, random_state=0):
        self.model = model
        self.n_sources = n_sources
        self.iterations = iterations
        self.limit = limit
        self.onlookers = onlookers
        self.cv = cv
        self.bins = bins
        self.random_state = random_state

    def _bank(self, X, y=None):
        if isinstance(X, FeatureBank):
            return X
        if y is None:
            X = check_array(X, dtype=np.float64)
            return FeatureBank.from_arrays(X, np.zeros(X.shape[0]))
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        return FeatureBank.from_arrays(X, y)

    def fit(self, X, y=None):
        bank = self._bank(X, y)
        if y is not None and isinstance(X, FeatureBank):
            bank = FeatureBank(bank.specs, bank.blocks, bank.degenerate,
                               np.asarray(y, dtype=float), bank.pair_ids)
        if bank.n_rows < max(2, self.cv):
            raise ValueError(f"need at least {max(2, self.cv)} rows for {self.cv}-fold "
                             f"cross-validation, got n_samples = {bank.n_rows}")
        cfg = AbcConfig(self.n_sources, self.iterations, self.limit, self.random_state,
                        self.onlookers)
        space = SearchSpace.for_model(self.model, bank.n_configs)
        plan = stratified_kfold(bank.gold, self.cv, self.bins, self.random_state)
        self.result_ = optimize(cfg, space, bank, self.model, plan)
        self.selection_ = list(self.result_.decoded.selected)
        self.hyperparams_ = dict(self.result_.decoded.hyperparams)
        self.best_fitness_ = self.result_.best_fitness
        self.history_ = list(self.result_.history)
        self.n_features_in_ = len(bank.specs)
        if not self.selection_:
            raise RuntimeError("the colony found no solution with a nonempty feature set")
        ids = [bank.specs[j].column_id(c) for j, c in self.selection_]
        self.feature_ids_ = ids
        self.model_ = make_model(self.model, self.hyperparams_, self.random_state)
        self.model_.fit(bank.columns(self.selection_), bank.gold, feature_ids=ids)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        bank = self._bank(X)
        if len(bank.specs) != self.n_features_in_:
            raise ValueError(f"X has {len(bank.specs)} features, but BeeColonyRegressor is "
                             f"expecting {self.n_features_in_} features as input")
        return self.model_.predict(bank.columns(self.selection_))
