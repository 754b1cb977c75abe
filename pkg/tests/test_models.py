import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from readmit import models
from readmit.models import (ForestParams, GbmParams, GlmParams, SvmParams, kernel_matrix,
                            oob_permutation_losses, train_forest, train_gbm, train_glm, train_svm)
from readmit.models.glm import penalized_gradient, penalized_loglik
from readmit.models.svm import platt_scale, smo
from support import two_gaussians, xor_data


def logistic_data(seed, n=200, p=5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = rng.normal(0, 1, p)
    y = (rng.random(n) < 1 / (1 + np.exp(-(0.3 + X @ beta)))).astype(int)
    return X, y


# ---------------------------------------------------------------- GLM

def central_diff(f, beta, h=1e-6):
    g = np.zeros_like(beta)
    for k in range(len(beta)):
        e = np.zeros_like(beta)
        e[k] = h
        g[k] = (f(beta + e) - f(beta - e)) / (2 * h)
    return g


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 2.0]))
def test_glm_gradient_matches_finite_differences(seed, l2):
    X, y = logistic_data(seed)
    beta = np.random.default_rng(seed + 1).normal(0, 0.5, X.shape[1] + 1)
    fd = central_diff(lambda b: penalized_loglik(b, X, y, l2), beta)
    an = penalized_gradient(beta, X, y, l2)
    assert np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) < 1e-4


@pytest.mark.parametrize("l2", [0.0, 0.5, 5.0])
def test_glm_matches_generic_optimizer(l2):
    X, y = logistic_data(3)
    model = train_glm(X, y, GlmParams(l2_penalty=l2))
    ref = minimize(lambda b: -penalized_loglik(b, X, y, l2), np.zeros(X.shape[1] + 1),
                   jac=lambda b: -penalized_gradient(b, X, y, l2), method="BFGS",
                   options={"gtol": 1e-10})
    fitted = np.concatenate([[model.intercept], model.coef])
    np.testing.assert_allclose(fitted, ref.x, atol=1e-5)
    assert model.converged
    assert np.max(np.abs(penalized_gradient(fitted, X, y, l2))) < 1e-6


def test_glm_intercept_is_unpenalized():
    X = np.zeros((100, 1))
    y = np.array([1] * 80 + [0] * 20)
    m = train_glm(X, y, GlmParams(l2_penalty=50.0))
    assert m.intercept == pytest.approx(np.log(4.0), abs=1e-8)


def test_glm_wald_pvalues_agree_with_normal_theory():
    X, y = logistic_data(5, n=500)
    m = train_glm(X, y)
    p = m.wald_pvalues()
    assert p.shape == (X.shape[1],) and np.all((p >= 0) & (p <= 1))
    from scipy.stats import norm
    np.testing.assert_allclose(p, 2 * norm.sf(np.abs(m.coef / m.std_errors[1:])))


def test_glm_separation_falls_back_to_penalty():
    X = np.array([[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    with pytest.warns(models.SeparationWarning):
        m = train_glm(X, y)
    assert m.penalty_used == 1.0 and np.all(np.isfinite(m.coef))
    assert models.classify(m.predict_proba(X)).tolist() == y.tolist()


# ---------------------------------------------------------------- SVM

def test_kernels():
    A = np.array([[1.0, 2.0]])
    B = np.array([[0.0, 1.0], [1.0, 2.0]])
    assert kernel_matrix(A, B, "linear").tolist() == [[2.0, 5.0]]
    np.testing.assert_allclose(kernel_matrix(A, B, "rbf", gamma=0.5), [[np.exp(-1.0), 1.0]])
    assert kernel_matrix(A, B, "poly", degree=2).tolist() == [[9.0, 36.0]]


def dual_objective(alpha, K, y):
    v = alpha * y
    return alpha.sum() - 0.5 * v @ K @ v


@pytest.mark.parametrize("kernel,C", [("linear", 1.0), ("rbf", 0.5), ("rbf", 10.0)])
def test_smo_matches_qp_and_kkt(kernel, C):
    X, y01 = two_gaussians(60, 2, sep=1.5, seed=4)
    y = np.where(y01 > 0, 1.0, -1.0)
    K = kernel_matrix(X, X, kernel, gamma=0.5)
    alpha, bias, _ = smo(K, y, C, tol=1e-5)
    ref = minimize(lambda a: -dual_objective(a, K, y), np.zeros(len(y)),
                   jac=lambda a: -(1 - y * (K @ (a * y))), method="SLSQP",
                   bounds=[(0, C)] * len(y), constraints=[{"type": "eq", "fun": lambda a: a @ y}],
                   options={"ftol": 1e-12, "maxiter": 500})
    assert dual_objective(alpha, K, y) >= -ref.fun - 1e-6
    assert abs(alpha @ y) < 1e-9 and np.all((alpha >= 0) & (alpha <= C))
    margin = y * (K @ (alpha * y) + bias)
    tol = 1e-3
    assert np.all(margin[alpha == 0] >= 1 - tol)
    assert np.all(margin[alpha == C] <= 1 + tol)
    free = (alpha > 0) & (alpha < C)
    assert np.all(np.abs(margin[free] - 1) <= tol)


def test_two_point_linear_svm():
    K = kernel_matrix(np.array([[1.0], [-1.0]]), np.array([[1.0], [-1.0]]), "linear")
    alpha, bias, _ = smo(K, np.array([1.0, -1.0]), 10.0)
    np.testing.assert_allclose(alpha, [0.5, 0.5])
    assert bias == pytest.approx(0.0)


def test_svm_rbf_solves_xor():
    X, y = xor_data()
    m = train_svm(X, y, SvmParams(C=10.0, gamma=1.0))
    assert np.all(np.sign(m.decision_function(X)) == np.where(y > 0, 1, -1))


def test_platt_is_monotone_and_calibrated_direction():
    f = np.linspace(-3, 3, 200)
    y = (np.random.default_rng(0).random(200) < 1 / (1 + np.exp(-2 * f))).astype(int)
    A, B = platt_scale(f, y)
    assert A < 0
    p = 1 / (1 + np.exp(A * f + B))
    assert np.all(np.diff(p) > 0)


# ---------------------------------------------------------------- GBM

def test_gbm_score_is_stage_sum():
    X, y = two_gaussians(300, 3, sep=1.0, seed=2)
    m = train_gbm(X, y, GbmParams(n_stages=20, learning_rate=0.3))
    manual = m.base_score + 0.3 * np.sum([t.predict_value(X) for t in m.trees], axis=0)
    np.testing.assert_allclose(m.raw_score(X), manual, rtol=0, atol=1e-12)
    assert len(m.train_mse) == 21
    assert m.base_score == pytest.approx(y.mean())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_gbm_training_mse_non_increasing(seed, lr):
    X, y = two_gaussians(200, 3, sep=1.0, seed=seed)
    m = train_gbm(X, y, GbmParams(n_stages=30, learning_rate=lr))
    assert np.all(np.diff(m.train_mse) <= 1e-12)


def test_gbm_logistic_loss_mode():
    X, y = two_gaussians(300, 3, sep=2.0, seed=1)
    m = train_gbm(X, y, GbmParams(n_stages=30, loss="logistic"))
    p = m.predict_proba(X)
    assert np.all((p > 0) & (p < 1)) and np.mean((p >= 0.5) == y) > 0.9


# ---------------------------------------------------------------- forest

def test_forest_is_seeded_and_counts_bootstrap():
    X, y = two_gaussians(200, 4, sep=1.5, seed=0)
    a = train_forest(X, y, ForestParams(n_trees=10), seed=5)
    b = train_forest(X, y, ForestParams(n_trees=10), seed=5)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))
    assert a.m == 2 and a.inbag_counts(0).sum() == 200
    assert ForestParams(regression=True).features_per_split(9) == 3
    assert ForestParams(m=7).features_per_split(9) == 7


def test_oob_loss_zero_for_unused_features():
    X, y = two_gaussians(200, 4, sep=2.0, seed=0)
    forest = train_forest(X, y, ForestParams(n_trees=15, max_depth=1), seed=3)
    losses = oob_permutation_losses(forest, X, y, seed=1)
    assert losses.shape == (15, 4)
    for k, tree in enumerate(forest.trees):
        used = set(tree.feature[tree.feature >= 0].tolist())
        for j in range(4):
            if j not in used:
                assert losses[k, j] == 0.0


# ---------------------------------------------------------------- dispatcher / persistence

@pytest.mark.parametrize("family", models.FAMILIES)
def test_round_trip_predictions_identical(family, tmp_path):
    X, y = two_gaussians(200, 3, sep=2.0, seed=9)
    params = models.make_params(family, **({"n_trees": 8} if family == "forest" else {}))
    m = models.train(family, X, y, params, seed=2)
    path = tmp_path / f"{family}.json"
    models.save_model(m, path)
    doc = json.loads(path.read_text())
    assert (doc["format"], doc["version"], doc["family"]) == ("readmit-model", 1, family)
    back = models.load_model(path)
    np.testing.assert_array_equal(models.predict(back, X), models.predict(m, X))
    assert back.threshold == m.threshold
    with pytest.raises(models.SchemaMismatch):
        models.predict(back, X[:, :2])


def test_classify_and_params_validation():
    assert models.classify(np.array([0.49, 0.5, 0.9])).tolist() == [0, 1, 1]
    assert models.classify(np.array([0.3]), 0.3).tolist() == [1]
    with pytest.raises(models.ParamError):
        models.make_params("gbm", depth=3)
    with pytest.raises(ValueError):
        models.train("knn", np.zeros((2, 1)), np.array([0, 1]))
