import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone
from sklearn.utils.estimator_checks import parametrize_with_checks

from stsabc.abcopt import BeeColonyRegressor
from stsabc.models import (MODEL_KINDS, DecisionTreeRegressor, GradientBoostingRegressor,
                           LinearRegression, RandomForestRegressor, RidgeRegression, load_model,
                           make_model, model_from_dict, model_to_dict, save_model)


@parametrize_with_checks([LinearRegression(), RidgeRegression(alpha=0.5),
                          DecisionTreeRegressor(max_depth=4), RandomForestRegressor(n_trees=5),
                          GradientBoostingRegressor(n_estimators=10),
                          BeeColonyRegressor(model="linear", n_sources=3, iterations=2, cv=3)])
def test_sklearn_compatible(estimator, check):
    check(estimator)


def line_data():
    x = np.linspace(-2.0, 3.0, 10)
    return x[:, None], 2.0 * x + 1.0


def test_ols_recovers_line():
    X, y = line_data()
    m = LinearRegression().fit(X, y)
    assert m.coef_[0] == pytest.approx(2.0, abs=1e-8)
    assert m.intercept_ == pytest.approx(1.0, abs=1e-8)


def test_ridge_zero_equals_ols():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 4))
    y = X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=40)
    a = LinearRegression().fit(X, y)
    b = RidgeRegression(alpha=0.0).fit(X, y)
    assert np.allclose(a.coef_, b.coef_, atol=1e-8)
    assert b.intercept_ == pytest.approx(a.intercept_, abs=1e-8)


def test_ridge_shrinks_coefficients_not_intercept():
    X, y = line_data()
    m = RidgeRegression(alpha=1e6).fit(X, y + 10.0)
    assert abs(m.coef_[0]) < 1e-3
    assert m.intercept_ == pytest.approx(np.mean(y + 10.0), rel=1e-3)


def test_collinear_columns_do_not_crash():
    X, y = line_data()
    X2 = np.hstack([X, X])
    pred = LinearRegression().fit(X2, y).predict(X2)
    assert np.allclose(pred, y, atol=1e-6)


def test_tree_depth_one_step():
    x = np.linspace(0.0, 1.0, 11)
    y = (x > 0.5).astype(float)
    m = DecisionTreeRegressor(max_depth=1).fit(x[:, None], y)
    t = m.tree_
    assert t.feature[0] == 0
    assert 0.4 < t.threshold[0] < 0.6
    leaves = sorted(t.value[t.feature == -1])
    assert leaves == [0.0, 1.0]


def test_tree_threshold_is_midpoint_and_ties_go_low():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    t = DecisionTreeRegressor(max_depth=1).fit(X, y).tree_
    assert t.feature[0] == 0
    assert t.threshold[0] == 1.5


def test_deep_tree_memorizes():
    rng = np.random.default_rng(1)
    X = rng.random((50, 3))
    y = rng.normal(size=50)
    m = DecisionTreeRegressor(max_depth=50).fit(X, y)
    assert np.array_equal(m.predict(X), y)


def test_boosting_lr_one_fits_eight_points():
    X = np.arange(8, dtype=float)[:, None]
    y = np.array([3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, 6.0])
    m = GradientBoostingRegressor(n_estimators=50, learning_rate=1.0, max_depth=3).fit(X, y)
    assert np.mean((m.predict(X) - y) ** 2) < 1e-6


def test_boosting_mse_non_increasing():
    rng = np.random.default_rng(7)
    X = rng.random((200, 5))
    y = np.sin(4 * X[:, 0]) + X[:, 1] ** 2 + 0.3 * rng.normal(size=200)
    m = GradientBoostingRegressor(n_estimators=500, learning_rate=0.1, max_depth=3).fit(X, y)
    mse = [np.mean((p - y) ** 2) for p in m.staged_predict(X)]
    assert len(mse) == 500
    assert all(b <= a for a, b in zip(mse, mse[1:]))


def test_constant_target():
    X = np.random.default_rng(0).random((20, 2))
    y = np.full(20, 3.5)
    for kind in MODEL_KINDS:
        pred = make_model(kind).fit(X, y).predict(X)
        assert np.allclose(pred, 3.5)


def test_forest_single_tree():
    rng = np.random.default_rng(4)
    X = rng.random((30, 3))
    y = X[:, 0] + rng.normal(scale=0.1, size=30)
    f = RandomForestRegressor(n_trees=1, feature_fraction=1.0, max_depth=4, random_state=3).fit(X, y)
    assert np.array_equal(f.predict(X), f.trees_[0].predict(X))
    rows = np.random.default_rng(np.random.SeedSequence(3).spawn(1)[0]).integers(0, 30, size=30)
    single = DecisionTreeRegressor(max_depth=4).fit(X[rows], y[rows])
    assert np.array_equal(f.predict(X), single.predict(X))


def test_forest_seeding():
    rng = np.random.default_rng(5)
    X = rng.random((60, 4))
    y = X @ [1.0, 2.0, 0.0, -1.0]
    a = RandomForestRegressor(n_trees=10, feature_fraction=0.5, random_state=1).fit(X, y)
    b = RandomForestRegressor(n_trees=10, feature_fraction=0.5, random_state=1).fit(X, y)
    c = RandomForestRegressor(n_trees=10, feature_fraction=0.5, random_state=2).fit(X, y)
    assert np.array_equal(a.predict(X), b.predict(X))
    assert not np.array_equal(a.predict(X), c.predict(X))


@pytest.mark.parametrize("kind", sorted(MODEL_KINDS))
def test_save_load_prediction_identical(tmp_path, kind):
    rng = np.random.default_rng(2)
    X = rng.random((40, 3))
    y = X[:, 0] - X[:, 2] + 0.1 * rng.normal(size=40)
    m = make_model(kind, seed=9).fit(X, y, feature_ids=["a", "b", "c"])
    save_model(m, tmp_path / "m.json")
    again = load_model(tmp_path / "m.json")
    Xt = rng.random((25, 3))
    assert again.predict(Xt).tobytes() == m.predict(Xt).tobytes()
    assert again.feature_ids_ == ["a", "b", "c"]
    assert model_from_dict(model_to_dict(m)).get_params() == m.get_params()


def test_feature_id_mismatch():
    X, y = line_data()
    m = LinearRegression().fit(X, y, feature_ids=["jaccard"])
    m.predict(X, feature_ids=["jaccard"])
    with pytest.raises(ValueError):
        m.predict(X, feature_ids=["dice"])
    with pytest.raises(ValueError):
        m.predict(np.hstack([X, X]))


def test_empty_predict_and_too_few_rows():
    X, y = line_data()
    m = GradientBoostingRegressor(n_estimators=3).fit(X, y)
    assert m.predict(np.zeros((0, 1))).shape == (0,)
    with pytest.raises(ValueError):
        LinearRegression().fit(X[:1], y[:1])


@pytest.mark.parametrize("kind,params", [
    ("ridge", {"alpha": -1}), ("tree", {"max_depth": 0}), ("tree", {"min_leaf": 0}),
    ("forest", {"n_trees": 0}), ("forest", {"feature_fraction": 0.0}),
    ("boosting", {"learning_rate": 1.5}), ("boosting", {"n_estimators": 0}),
])
def test_parameter_validation(kind, params):
    X, y = line_data()
    with pytest.raises(ValueError):
        make_model(kind, params).fit(X, y)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_model("svr")


def test_get_params_and_clone():
    m = GradientBoostingRegressor(n_estimators=7, learning_rate=0.2)
    assert m.get_params() == {"n_estimators": 7, "learning_rate": 0.2, "max_depth": 3, "min_leaf": 1}
    c = clone(m)
    assert c.get_params() == m.get_params() and c is not m


@given(st.integers(0, 10_000))
def test_tree_piecewise_constant(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((30, 2))
    y = rng.normal(size=30)
    m = DecisionTreeRegressor(max_depth=3).fit(X, y)
    t = m.tree_
    thresholds = {f: sorted(t.threshold[t.feature == f]) for f in (0, 1)}
    x = rng.random(2)
    # move x inside the open cell between its neighbouring thresholds
    moved = x.copy()
    for f in (0, 1):
        lo = max([c for c in thresholds[f] if c < x[f]], default=0.0)
        hi = min([c for c in thresholds[f] if c >= x[f]], default=1.0)
        moved[f] = lo + 0.37 * (hi - lo) if hi > lo else x[f]
    assert m.predict(x[None])[0] == m.predict(moved[None])[0]


def test_fit_is_deterministic():
    rng = np.random.default_rng(8)
    X = rng.random((80, 4))
    y = rng.normal(size=80)
    for kind in MODEL_KINDS:
        a = make_model(kind, seed=3).fit(X, y).predict(X)
        b = make_model(kind, seed=3).fit(X, y).predict(X)
        assert a.tobytes() == b.tobytes()
