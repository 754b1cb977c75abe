"""Native classifiers: CART, random forest, gradient boosting, logistic GLM, kernel SVM."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Union

import numpy as np

from .cart import CartModel, train_cart
from .forest import ForestModel, oob_permutation_losses, train_forest
from .gbm import GbmModel, train_gbm
from .glm import GlmModel, SeparationWarning, train_glm
from .params import (CART, FAMILIES, FOREST, GBM, GLM, SVM, CartParams, ForestParams, GbmParams,
                     GlmParams, ParamError, SvmParams, default_params, make_params,
                     params_to_dict)
from .svm import SvmModel, kernel_matrix, train_svm
from .tree import DecisionTree, grow_tree, prune, pruning_path

TrainedModel = Union[CartModel, ForestModel, GbmModel, GlmModel, SvmModel]

MODEL_FORMAT = "readmit-model"
MODEL_VERSION = 1


class SchemaMismatch(ValueError):
    pass


def train(family: str, X, y, params=None, seed: int = 0) -> TrainedModel:
    """Train one family; ``seed`` only matters for the forest."""
    params = default_params(family) if params is None else params
    if family == CART:
        return train_cart(X, y, params)
    if family == FOREST:
        return train_forest(X, y, params, seed)
    if family == GBM:
        return train_gbm(X, y, params)
    if family == GLM:
        return train_glm(X, y, params)
    if family == SVM:
        return train_svm(X, y, params)
    raise ParamError(f"unknown model family {family!r}")


def predict(model: TrainedModel, X) -> np.ndarray:
    """Class-1 probability for each row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatch(f"model expects {model.n_features} columns, got "
                             f"{X.shape[1] if X.ndim == 2 else X.shape}")
    return model.predict_proba(X)


def classify(scores, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(scores) >= threshold).astype(np.int8)


# ---------------------------------------------------------------- persistence

def _arr(a):
    return np.asarray(a).tolist()


def model_to_dict(model: TrainedModel) -> dict:
    fam = model.family
    if fam == CART:
        state = {"tree": model.tree.to_dict()}
    elif fam == FOREST:
        state = {"trees": [t.to_dict() for t in model.trees], "tree_seeds": list(model.tree_seeds),
                 "m": model.m, "n_train": model.n_train}
    elif fam == GBM:
        state = {"base_score": model.base_score, "trees": [t.to_dict() for t in model.trees],
                 "learning_rate": model.learning_rate, "train_mse": list(model.train_mse)}
    elif fam == GLM:
        state = {"intercept": model.intercept, "coef": _arr(model.coef),
                 "std_errors": _arr(model.std_errors), "converged": model.converged,
                 "n_iter": model.n_iter, "penalty_used": model.penalty_used}
    elif fam == SVM:
        state = {"support_vectors": _arr(model.support_vectors), "dual_coef": _arr(model.dual_coef),
                 "bias": model.bias, "platt_a": model.platt_a, "platt_b": model.platt_b,
                 "n_iter": model.n_iter}
    else:
        raise ParamError(f"unknown model family {fam!r}")
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "family": fam,
            "n_features": model.n_features, "threshold": model.threshold,
            "hyperparameters": asdict(model.params), "state": state}


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a readmit model file")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model file version {d.get('version')}")
    fam, s, p = d["family"], d["state"], d["n_features"]
    params = make_params(fam, **d["hyperparameters"])
    thr = d["threshold"]
    if fam == CART:
        return CartModel(DecisionTree.from_dict(s["tree"]), params, p, thr)
    if fam == FOREST:
        return ForestModel(tuple(DecisionTree.from_dict(t) for t in s["trees"]),
                           tuple(s["tree_seeds"]), s["m"], params, p, s["n_train"], thr)
    if fam == GBM:
        return GbmModel(s["base_score"], tuple(DecisionTree.from_dict(t) for t in s["trees"]),
                        s["learning_rate"], params, p, tuple(s["train_mse"]), thr)
    if fam == GLM:
        return GlmModel(s["intercept"], np.array(s["coef"], dtype=float),
                        np.array(s["std_errors"], dtype=float), params, p, s["converged"],
                        s["n_iter"], s["penalty_used"], thr)
    if fam == SVM:
        sv = np.array(s["support_vectors"], dtype=float).reshape(-1, p)
        return SvmModel(sv, np.array(s["dual_coef"], dtype=float), s["bias"], params, p,
                        s["platt_a"], s["platt_b"], s["n_iter"], thr)
    raise ParamError(f"unknown model family {fam!r}")


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "CART", "FOREST", "GBM", "GLM", "SVM", "FAMILIES", "CartParams", "ForestParams", "GbmParams",
    "GlmParams", "SvmParams", "CartModel", "ForestModel", "GbmModel", "GlmModel", "SvmModel",
    "DecisionTree", "TrainedModel", "SeparationWarning", "SchemaMismatch", "ParamError",
    "train", "train_cart", "train_forest", "train_gbm", "train_glm", "train_svm", "predict",
    "classify", "grow_tree", "prune", "pruning_path", "kernel_matrix", "oob_permutation_losses",
    "default_params", "make_params", "params_to_dict", "save_model", "load_model", "model_to_dict", "model_from_dict",
]
