import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stsabc.evaluation import (ReportEntry, UndefinedCorrelation, compare_correlations, finalize,
                               is_undefined, load_report_csv, pearson, render_report, strata,
                               stratified_kfold, stratified_split)

floats = st.floats(-100, 100, allow_nan=False)


# --- pearson ----------------------------------------------------------------


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_undefined_and_errors():
    r = pearson([1, 1, 1], [1, 2, 3])
    assert is_undefined(r) and isinstance(r, UndefinedCorrelation)
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [1])


@given(st.lists(st.tuples(floats, floats), min_size=3, max_size=20),
       st.floats(0.1, 10), st.floats(-5, 5), st.floats(-10, -0.1))
def test_pearson_affine_invariance(xy, scale, shift, neg):
    x = np.array([a for a, _ in xy])
    y = np.array([b for _, b in xy])
    r = pearson(x, y)
    if is_undefined(r) or np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert -1.0 <= r <= 1.0
    assert pearson(scale * x + shift, y) == pytest.approx(r, abs=1e-9)
    assert pearson(x, neg * y + shift) == pytest.approx(-r, abs=1e-9)


# --- splitting --------------------------------------------------------------


def gold100(seed=0):
    return np.random.default_rng(seed).random(100) * 5


def test_split_100_rows():
    g = gold100()
    train, hold = stratified_split(g, 0.8, 5, seed=3)
    assert len(train) == 80 and len(hold) == 20
    assert sorted(np.concatenate([train, hold]).tolist()) == list(range(100))
    labels = strata(g, 5)
    for s in range(5):
        assert abs(np.sum(labels[train] == s) - 16) <= 1
        assert abs(np.sum(labels[hold] == s) - 4) <= 1


def test_split_two_rows():
    train, hold = stratified_split([1.0, 2.0], 0.5, 5, seed=0)
    assert len(train) == 1 and len(hold) == 1


def test_split_constant_gold():
    g = np.full(30, 2.0)
    assert (strata(g) == 0).all()
    train, hold = stratified_split(g, 0.8, 5, seed=1)
    assert len(train) == 24 and len(hold) == 6


def test_split_seeded_and_validated():
    g = gold100()
    a = stratified_split(g, 0.8, seed=5)
    b = stratified_split(g, 0.8, seed=5)
    c = stratified_split(g, 0.8, seed=6)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])
    for frac in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            stratified_split(g, frac)


def test_kfold_100_rows():
    g = gold100(1)
    plan = stratified_kfold(g, 10, 5, seed=2)
    labels = strata(g, 5)
    seen = np.zeros(100, dtype=int)
    for train, test in plan:
        assert len(test) == 10 and len(train) == 90
        assert not set(train) & set(test)
        seen[test] += 1
        for s in range(5):
            assert abs(np.sum(labels[test] == s) - 2) <= 1
    assert (seen == 1).all()
    assert plan == stratified_kfold(g, 10, 5, seed=2)
    assert plan != stratified_kfold(g, 10, 5, seed=3)


def test_kfold_errors():
    with pytest.raises(ValueError):
        stratified_kfold(gold100(), 1)
    with pytest.raises(ValueError):
        stratified_kfold([1.0, 2.0, 3.0], 4)


@given(st.lists(st.floats(0, 5), min_size=2, max_size=60), st.integers(2, 10),
       st.integers(1, 6), st.integers(0, 1000))
def test_kfold_partition_property(gold, k, bins, seed):
    if k > len(gold):
        return
    plan = stratified_kfold(gold, k, bins, seed)
    sizes = np.bincount(plan.folds, minlength=k)
    assert sizes.sum() == len(gold)
    assert (sizes > 0).all()
    assert sizes.max() - sizes.min() <= 1


# --- finalize ---------------------------------------------------------------


def test_finalize_perfect_feature():
    rng = np.random.default_rng(0)
    X = rng.random((250, 2))
    y = 4 * X[:, 0] + 1
    e = finalize("linear", [0], {}, X[:200], y[:200], X[200:], y[200:], feature_ids=["a", "b"])
    assert e.pearson == pytest.approx(1.0, abs=1e-6)
    assert e.selected == ["a"] and e.family == "ml"
    assert e.predictions.shape == (50,)


def test_finalize_noise():
    rng = np.random.default_rng(1)
    X = rng.random((400, 3))
    y = rng.normal(size=400)
    e = finalize("boosting", [0, 1, 2], {"n_estimators": 50}, X[:200], y[:200], X[200:], y[200:])
    assert abs(e.pearson) < 0.3


def test_finalize_errors_and_reproducibility():
    rng = np.random.default_rng(2)
    X = rng.random((40, 2))
    y = X[:, 1]
    with pytest.raises(ValueError):
        finalize("linear", [0], {}, X, y, np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        finalize("linear", [], {}, X, y, X, y)
    a = finalize("forest", [0, 1], {"n_trees": 5}, X[:30], y[:30], X[30:], y[30:], seed=4)
    b = finalize("forest", [0, 1], {"n_trees": 5}, X[:30], y[:30], X[30:], y[30:], seed=4)
    assert a.predictions.tobytes() == b.predictions.tobytes()


# --- correlation comparison --------------------------------------------------


def test_compare_identical_predictions():
    rng = np.random.default_rng(0)
    g = rng.random(50)
    p = g + rng.normal(scale=0.3, size=50)
    delta, pval = compare_correlations(p, p, g)
    assert delta == 0.0 and pval == pytest.approx(1.0)


def test_compare_perfect_vs_noise():
    rng = np.random.default_rng(1)
    g = rng.random(200)
    delta, pval = compare_correlations(g, rng.random(200), g, seed=3)
    assert delta > 0.8 and pval < 0.05


def test_compare_errors():
    with pytest.raises(ValueError):
        compare_correlations([1, 2, 3], [1, 2, 3], [1, 2, 3], n_resamples=0)
    with pytest.raises(ValueError):
        compare_correlations([1, 2, 3], [1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        compare_correlations([1, 2], [1, 2], [1, 2])


# --- reports ----------------------------------------------------------------


def test_one_entry_table():
    text = render_report([ReportEntry("jaccard", "term", 0.61234, dataset="sts")])
    rows = [line for line in text.splitlines() if line.startswith("| jaccard")]
    assert rows == ["| jaccard | sts | **0.612** |"]
    assert "Term-based" in text


def test_best_per_family_marked():
    entries = [ReportEntry("a", "char", 0.5), ReportEntry("b", "char", 0.7),
               ReportEntry("boosting", "ml", 0.8), ReportEntry("x", "char", UndefinedCorrelation())]
    md = render_report(entries)
    assert "| a |  | 0.500 |" in md and "| b |  | **0.700** |" in md
    assert "| x |  | n/a |" in md
    assert md.index("Character-based") < md.index("Custom ML")
    csv_rows = render_report(entries, "csv").splitlines()
    assert csv_rows[0].startswith("family,method")
    best = {r.split(",")[1]: r.split(",")[4] for r in csv_rows[1:]}
    assert best == {"a": "0", "b": "1", "boosting": "1", "x": "0"}


def test_empty_report_and_bad_format():
    assert render_report([]).startswith("| Method |")
    with pytest.raises(ValueError):
        render_report([], "html")


def test_csv_round_trip():
    entries = [ReportEntry("boosting", "ml", 0.812345678, ["jaccard-word", "hal-cosine-mean"],
                           {"n_estimators": 120, "learning_rate": 0.05}, 12.5, "sts"),
               ReportEntry("jaro", "char", UndefinedCorrelation(), dataset="sts")]
    # rows come back grouped by family
    again = {e.name: e for e in load_report_csv(render_report(entries, "csv"))}
    assert again["boosting"].to_dict() == entries[0].to_dict()
    assert again["jaro"].to_dict() == entries[1].to_dict()
    assert round(again["boosting"].pearson, 4) == 0.8123
    assert math.isnan(again["jaro"].pearson)


def test_entry_dict_round_trip():
    e = ReportEntry("ridge", "ml", 0.5, ["a"], {"alpha": 0.1}, None, "d")
    assert ReportEntry.from_dict(e.to_dict()) == e
