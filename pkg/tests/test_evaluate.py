import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readmit import models
from readmit.evaluate import (ConfusionMatrix, bin_feature, compare_sampling, confusion,
                              evaluate_model, interaction_means, metrics)
from support import count_metrics, two_gaussians


def test_worked_example():
    cm = ConfusionMatrix(tp=2, fp=1, tn=1, fn=1)
    r = metrics(cm)
    assert r.accuracy == pytest.approx(0.6)
    assert r.sensitivity == pytest.approx(2 / 3) and r.recall == r.sensitivity
    assert r.specificity == pytest.approx(0.5)
    assert r.precision == pytest.approx(2 / 3) and r.f1 == pytest.approx(2 / 3)


def test_confusion_counts_and_validation():
    assert confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1]) == ConfusionMatrix(2, 1, 1, 1)
    with pytest.raises(ValueError):
        confusion([1, 0], [1])
    with pytest.raises(ValueError):
        confusion([2, 0], [1, 0])


def test_undefined_metrics_are_none_not_zero():
    r = metrics(confusion([0, 0, 0], [0, 0, 0]))
    assert r.accuracy == 1.0 and r.specificity == 1.0
    assert r.precision is None and r.sensitivity is None and r.f1 is None
    assert set(r.undefined()) >= {"precision", "sensitivity", "f1"}


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metrics_match_counting_oracle(pairs):
    pred, truth = map(list, zip(*pairs))
    ref = count_metrics(pred, truth)
    got = metrics(confusion(pred, truth)).as_dict()
    for k in ("accuracy", "sensitivity", "specificity", "precision", "f1", "recall"):
        assert got[k] == ref[k]


def test_evaluate_model_uses_model_threshold():
    X, y = two_gaussians(200, 2, sep=3.0, seed=0)
    m = models.train("glm", X, y, models.GlmParams(threshold=0.99))
    cm, rep = evaluate_model(m, X, y)
    strict = models.classify(m.predict_proba(X), 0.99)
    assert cm.tp + cm.fp == int(strict.sum())


def test_compare_sampling_reports_each_strategy_and_isolates_failures():
    X, y = two_gaussians(300, 2, sep=2.0, seed=1)
    keep = np.flatnonzero(y == 0).tolist() + np.flatnonzero(y == 1)[:30].tolist()
    Xtr, ytr = X[keep], y[keep]
    comp = compare_sampling(["oversample", "undersample", "rose"], "glm", Xtr, ytr, X, y, seed=0)
    assert {r[0] for r in comp.rows} == {"oversample", "undersample", "rose"}
    assert all(r[3] == "" and 0 <= r[2] <= 1 for r in comp.rows)
    broken = compare_sampling(["oversample"], "glm", Xtr, np.zeros_like(ytr), X, y)
    assert all(r[2] is None and "PreprocessError" in r[3] for r in broken.rows)
    assert comp.to_csv().splitlines()[0] == "strategy,metric,value,error"


def test_bin_feature_boundary_is_low():
    b, labels = bin_feature(np.array([0.0, 1.0, 1.0, 2.0, 3.0]))
    assert labels == ["low", "high"] and b.tolist() == [0, 0, 0, 1, 1]
    raw, lv = bin_feature(np.array([0.0, 2.0, 2.0]), max_raw_levels=3)
    assert lv == ["0.0", "2.0"] and raw.tolist() == [0, 1, 1]


def test_interaction_means_match_loop():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 4, size=(80, 2)).astype(float)
    y = rng.integers(0, 2, 80)
    g = interaction_means(X, y, ["a", "b"], "a", "b")
    ca, cb = np.quantile(X[:, 0], 0.5), np.quantile(X[:, 1], 0.5)
    for i, la in enumerate(["low", "high"]):
        for j, lb in enumerate(["low", "high"]):
            sel = [k for k in range(80) if (X[k, 0] > ca) == bool(i) and (X[k, 1] > cb) == bool(j)]
            assert g.counts[i, j] == len(sel)
            if sel:
                assert g.cell_mean(la, lb) == pytest.approx(np.mean(y[sel]))
            else:
                assert g.cell_mean(la, lb) is None
    with pytest.raises(KeyError):
        interaction_means(X, y, ["a", "b"], "a", "zzz")
