from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import GBM, GbmParams
from .tree import REGRESSION, DecisionTree, grow_tree


@dataclass(frozen=True)
class GbmModel:
    """Stagewise residual boosting.

    The raw score is ``base_score + sum(learning_rate * tree(x))``. With squared
    loss the score is clipped to [0, 1] as the class-1 probability; with
    logistic loss it is a log-odds.
    """

    base_score: float
    trees: tuple[DecisionTree, ...]
    learning_rate: float
    params: GbmParams
    n_features: int
    train_mse: tuple[float, ...]
    threshold: float = 0.5
    family: str = GBM

    @property
    def n_stages(self) -> int:
        return len(self.trees)

    def raw_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        f = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            f = f + self.learning_rate * tree.predict_value(X)
        return f

    def predict_proba(self, X) -> np.ndarray:
        f = self.raw_score(X)
        if self.params.loss == "logistic":
            return 1.0 / (1.0 + np.exp(-f))
        return np.clip(f, 0.0, 1.0)


def train_gbm(X, y, params: GbmParams = GbmParams()) -> GbmModel:
    """Fit residual-boosted regression trees.

    Squared loss: each stage fits a tree to the residuals ``y - F`` and adds
    ``learning_rate`` times its leaf means. Logistic loss: trees fit
    ``y - sigmoid(F)`` and leaves take one Newton step.
    ``train_mse[k]`` is the training MSE after ``k`` stages, measured on the raw
    score for squared loss (the minimized quantity) and on the probability for
    logistic loss.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lr = params.learning_rate
    logistic = params.loss == "logistic"
    if logistic:
        p0 = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        base = float(np.log(p0 / (1 - p0)))
    else:
        base = float(y.mean())
    f = np.full(len(y), base)

    def prob(score):
        return 1.0 / (1.0 + np.exp(-score)) if logistic else score

    mse = [float(np.mean((y - prob(f)) ** 2))]
    trees = []
    for _ in range(params.n_stages):
        if logistic:
            p = prob(f)
            resid = y - p
            tree = grow_tree(X, resid, task=REGRESSION, min_node_size=params.min_node_size,
                             max_depth=params.max_depth)
            leaves = tree.apply(X)
            num = np.bincount(leaves, weights=resid, minlength=tree.n_nodes)
            den = np.bincount(leaves, weights=p * (1 - p), minlength=tree.n_nodes)
            value = tree.value.copy()
            hit = den > 0
            value[hit] = num[hit] / np.maximum(den[hit], 1e-12)
            tree = DecisionTree(tree.feature, tree.threshold, tree.left, tree.right, value,
                                tree.n_node, tree.error, tree.task)
        else:
            resid = y - f
            tree = grow_tree(X, resid, task=REGRESSION, min_node_size=params.min_node_size,
                             max_depth=params.max_depth)
        f = f + lr * tree.predict_value(X)
        trees.append(tree)
        mse.append(float(np.mean((y - prob(f)) ** 2)))
    return GbmModel(base, tuple(trees), lr, params, X.shape[1], tuple(mse))
