"""Regression models trained on similarity feature matrices.

All five follow the scikit-learn estimator protocol (``fit``/``predict``,
``get_params``/``set_params``) so they drop into pipelines and clones, but the
learning code is our own. Tree growth runs in numba kernels; every random
draw derives from ``random_state``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

MODEL_FORMAT_VERSION = 1
JITTER = 1e-10


# ---------------------------------------------------------------------------
# tree kernels


@njit(cache=True)
def _next_random(state):
    # splitmix64; state is a 1-element uint64 array
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _presort(X):
    order = np.empty((X.shape[1], X.shape[0]), dtype=np.int64)
    for f in range(X.shape[1]):
        order[f] = np.argsort(X[:, f], kind="mergesort")
    return order


@njit(cache=True)
def _grow_tree(X, y, order, max_depth, min_leaf, n_sub, seed):
    """Grow one tree level by level.

    Each level makes a single pass over every presorted column, accumulating
    left-side sums per open node, so a level costs O(F * n). Returns the
    node arrays plus the leaf reached by every training row.
    """
    n, F = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    count = np.zeros(cap, dtype=np.int64)
    ymin = np.empty(cap)
    ymax = np.empty(cap)
    open_ = np.zeros(cap, dtype=np.bool_)
    cand = np.ones((cap, F), dtype=np.bool_) if n_sub < F else np.ones((1, F), dtype=np.bool_)
    s_left = np.zeros(cap)
    k_left = np.zeros(cap, dtype=np.int64)
    last_x = np.zeros(cap)
    best_gain = np.zeros(cap)
    best_f = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)
    yc = np.empty(n)
    s_total = np.zeros(cap)
    node_of = np.zeros(n, dtype=np.int64)
    perm = np.arange(F)
    state = np.array([np.uint64(seed)], dtype=np.uint64)

    level_lo = 0
    level_hi = 1
    n_nodes = 1
    depth = 0
    while True:
        for nd in range(level_lo, level_hi):
            value[nd] = 0.0
            count[nd] = 0
            ymin[nd] = np.inf
            ymax[nd] = -np.inf
        for r in range(n):
            nd = node_of[r]
            if nd >= level_lo:
                v = y[r]
                value[nd] += v
                count[nd] += 1
                if v < ymin[nd]:
                    ymin[nd] = v
                if v > ymax[nd]:
                    ymax[nd] = v
        any_open = False
        for nd in range(level_lo, level_hi):
            value[nd] /= count[nd]
            ok = depth < max_depth and count[nd] >= 2 * min_leaf and ymin[nd] < ymax[nd]
            open_[nd] = ok
            if ok:
                any_open = True
                s_left[nd] = 0.0
                k_left[nd] = 0
                best_gain[nd] = 0.0
                best_f[nd] = -1
                if n_sub < F:
                    for k in range(F):
                        perm[k] = k
                        cand[nd, k] = False
                    for k in range(n_sub):
                        j = k + np.int64(_next_random(state) % np.uint64(F - k))
                        tmp = perm[k]
                        perm[k] = perm[j]
                        perm[j] = tmp
                        cand[nd, perm[k]] = True
        if not any_open:
            break
        for nd in range(level_lo, level_hi):
            s_total[nd] = 0.0
        for r in range(n):
            nd = node_of[r]
            if nd >= level_lo:
                yc[r] = y[r] - value[nd]
                s_total[nd] += yc[r]

        for f in range(F):
            for nd in range(level_lo, level_hi):
                s_left[nd] = 0.0
                k_left[nd] = 0
            for q in range(n):
                r = order[f, q]
                nd = node_of[r]
                if nd < level_lo or not open_[nd]:
                    continue
                if n_sub < F and not cand[nd, f]:
                    continue
                x = X[r, f]
                k = k_left[nd]
                m = count[nd]
                if k >= min_leaf and m - k >= min_leaf and x != last_x[nd]:
                    sl = s_left[nd]
                    sr = s_total[nd] - sl
                    # targets are centered per node, which keeps these sums well conditioned
                    gain = sl * sl / k + sr * sr / (m - k) - s_total[nd] * s_total[nd] / m
                    if gain > best_gain[nd]:
                        best_gain[nd] = gain
                        best_f[nd] = f
                        thr = 0.5 * (last_x[nd] + x)
                        if thr >= x:
                            thr = last_x[nd]
                        best_thr[nd] = thr
                s_left[nd] += yc[r]
                k_left[nd] = k + 1
                last_x[nd] = x

        new_lo = n_nodes
        for nd in range(level_lo, level_hi):
            if open_[nd] and best_f[nd] >= 0:
                feature[nd] = best_f[nd]
                threshold[nd] = best_thr[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                n_nodes += 2
        if n_nodes == new_lo:
            break
        for r in range(n):
            nd = node_of[r]
            if nd >= level_lo and feature[nd] >= 0:
                if X[r, feature[nd]] <= threshold[nd]:
                    node_of[r] = left[nd]
                else:
                    node_of[r] = right[nd]
        level_lo = new_lo
        level_hi = n_nodes
        depth += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), node_of)


@njit(cache=True)
def _tree_predict(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


class _Tree:
    """Array-encoded regression tree; ``feature == -1`` marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @classmethod
    def grow(cls, X, y, max_depth, min_leaf, n_sub=None, seed=0, order=None):
        """Fit a tree; returns it with the leaf value reached by every training row."""
        n_sub = X.shape[1] if n_sub is None else n_sub
        if order is None:
            order = _presort(X)
        *arrays, leaf = _grow_tree(X, y, order, int(max_depth), int(min_leaf), int(n_sub),
                                   np.uint64(seed))
        tree = cls(*arrays)
        return tree, tree.value[leaf]

    def predict(self, X):
        return _tree_predict(X, self.feature, self.threshold, self.left, self.right, self.value)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


# ---------------------------------------------------------------------------
# estimators


class _Regressor(RegressorMixin, BaseEstimator):
    kind = ""

    def _validate_fit(self, X, y, feature_ids):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError(f"need at least 2 rows to fit, got n_samples = {X.shape[0]}")
        self.n_features_in_ = X.shape[1]
        if feature_ids is None:
            feature_ids = [f"x{i}" for i in range(X.shape[1])]
        feature_ids = [str(f) for f in feature_ids]
        if len(feature_ids) != X.shape[1]:
            raise ValueError("feature_ids length does not match the number of columns")
        self.feature_ids_ = feature_ids
        return np.ascontiguousarray(X), np.ascontiguousarray(y)

    def _validate_predict(self, X, feature_ids=None):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but {type(self).__name__} is "
                             f"expecting {self.n_features_in_} features as input")
        if feature_ids is not None and [str(f) for f in feature_ids] != self.feature_ids_:
            raise ValueError(f"column ids {list(feature_ids)} differ from training ids "
                             f"{self.feature_ids_}")
        return np.ascontiguousarray(X)

    def _get_state(self) -> dict:
        raise NotImplementedError

    def _set_state(self, state: dict) -> None:
        raise NotImplementedError


class LinearRegression(_Regressor):
    """Least squares with an intercept, solved from jittered normal equations."""

    kind = "linear"

    def __init__(self):
        pass

    def _penalty(self):
        return 0.0

    def fit(self, X, y, feature_ids=None):
        X, y = self._validate_fit(X, y, feature_ids)
        n, F = X.shape
        A = np.hstack([np.ones((n, 1)), X])
        gram = A.T @ A
        reg = np.full(F + 1, JITTER)
        reg[1:] += self._penalty()
        gram[np.diag_indices_from(gram)] += reg
        rhs = A.T @ y
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            beta = np.linalg.lstsq(gram, rhs, rcond=None)[0]
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def predict(self, X, feature_ids=None):
        X = self._validate_predict(X, feature_ids)
        return X @ self.coef_ + self.intercept_

    def _get_state(self):
        return {"intercept": self.intercept_, "coef": self.coef_.tolist()}

    def _set_state(self, state):
        self.intercept_ = float(state["intercept"])
        self.coef_ = np.asarray(state["coef"], dtype=float)


class RidgeRegression(LinearRegression):
    """L2-penalized least squares; the intercept is not penalized."""

    kind = "ridge"

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def _penalty(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        return float(self.alpha)


def _check_tree_params(max_depth, min_leaf):
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")


class DecisionTreeRegressor(_Regressor):
    """Greedy CART regression tree.

    Splits maximize the squared-error reduction over midpoints between sorted
    distinct feature values; ties go to the lowest feature index, then the
    lowest threshold.
    """

    kind = "tree"

    def __init__(self, max_depth=8, min_leaf=1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y, feature_ids=None):
        _check_tree_params(self.max_depth, self.min_leaf)
        X, y = self._validate_fit(X, y, feature_ids)
        self.tree_, _ = _Tree.grow(X, y, self.max_depth, self.min_leaf)
        return self

    def predict(self, X, feature_ids=None):
        X = self._validate_predict(X, feature_ids)
        return self.tree_.predict(X)

    def _get_state(self):
        return {"tree": self.tree_.to_dict()}

    def _set_state(self, state):
        self.tree_ = _Tree.from_dict(state["tree"])


class RandomForestRegressor(_Regressor):
    """Bagged trees with ``ceil(feature_fraction * F)`` candidate features per split."""

    kind = "forest"

    def __init__(self, n_trees=100, max_depth=8, min_leaf=1, feature_fraction=1.0,
                 random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_fraction = feature_fraction
        self.random_state = random_state

    def fit(self, X, y, feature_ids=None):
        _check_tree_params(self.max_depth, self.min_leaf)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError("feature_fraction must lie in (0, 1]")
        X, y = self._validate_fit(X, y, feature_ids)
        n, F = X.shape
        n_sub = max(1, min(F, math.ceil(self.feature_fraction * F)))
        seeds = np.random.SeedSequence(int(self.random_state)).spawn(int(self.n_trees))
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            rows = rng.integers(0, n, size=n)
            tree_seed = int(rng.integers(0, 2**63 - 1))
            tree, _ = _Tree.grow(np.ascontiguousarray(X[rows]), y[rows], self.max_depth,
                                 self.min_leaf, n_sub, tree_seed)
            self.trees_.append(tree)
        return self

    def predict(self, X, feature_ids=None):
        X = self._validate_predict(X, feature_ids)
        out = np.zeros(X.shape[0])
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)

    def _get_state(self):
        return {"trees": [t.to_dict() for t in self.trees_]}

    def _set_state(self, state):
        self.trees_ = [_Tree.from_dict(t) for t in state["trees"]]


class GradientBoostingRegressor(_Regressor):
    """Squared-loss boosting of depth-bounded trees, starting from ``mean(y)``."""

    kind = "boosting"

    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3, min_leaf=1):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y, feature_ids=None):
        _check_tree_params(self.max_depth, self.min_leaf)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        X, y = self._validate_fit(X, y, feature_ids)
        self.base_ = float(np.mean(y))
        current = np.full(X.shape[0], self.base_)
        order = _presort(X)
        self.trees_ = []
        for _ in range(int(self.n_estimators)):
            tree, fitted = _Tree.grow(X, y - current, self.max_depth, self.min_leaf, order=order)
            current = current + self.learning_rate * fitted
            self.trees_.append(tree)
        return self

    def staged_predict(self, X):
        """Yield predictions after each boosting stage."""
        X = self._validate_predict(X)
        current = np.full(X.shape[0], self.base_)
        for tree in self.trees_:
            current = current + self.learning_rate * tree.predict(X)
            yield current

    def predict(self, X, feature_ids=None):
        X = self._validate_predict(X, feature_ids)
        current = np.full(X.shape[0], self.base_)
        for tree in self.trees_:
            current = current + self.learning_rate * tree.predict(X)
        return current

    def _get_state(self):
        return {"base": self.base_, "trees": [t.to_dict() for t in self.trees_]}

    def _set_state(self, state):
        self.base_ = float(state["base"])
        self.trees_ = [_Tree.from_dict(t) for t in state["trees"]]


MODEL_KINDS = {
    cls.kind: cls
    for cls in (LinearRegression, RidgeRegression, DecisionTreeRegressor,
                RandomForestRegressor, GradientBoostingRegressor)
}


def make_model(kind: str, params: dict | None = None, seed: int = 0) -> _Regressor:
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}") from None
    model = cls(**(params or {}))
    if "random_state" in model.get_params():
        model.set_params(random_state=seed)
    return model


def fit(kind: str, X, y, seed: int = 0, params: dict | None = None, feature_ids=None):
    return make_model(kind, params, seed).fit(X, y, feature_ids=feature_ids)


def model_to_dict(model: _Regressor) -> dict:
    check_is_fitted(model, "n_features_in_")
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "params": model.get_params(),
        "feature_ids": model.feature_ids_,
        "state": model._get_state(),
    }


def model_from_dict(blob: dict) -> _Regressor:
    if blob.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {blob.get('format_version')!r}")
    model = MODEL_KINDS[blob["kind"]](**blob["params"])
    model.feature_ids_ = list(blob["feature_ids"])
    model.n_features_in_ = len(model.feature_ids_)
    model._set_state(blob["state"])
    return model


def save_model(model: _Regressor, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path) -> _Regressor:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
